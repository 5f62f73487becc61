// Copyright (c) 2026 The TDSR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tdsr/core/types.hpp"

#include <algorithm>
#include <cmath>

namespace tdsr {

Image::Image(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("Image: dimensions must be >= 1, got " +
                                std::to_string(channels) + "x" +
                                std::to_string(height) + "x" +
                                std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Image& Image::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  return *this;
}

Image Image::clamped() const {
  Image out = *this;
  out.clamp01();
  return out;
}

bool Box::valid() const {
  return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) &&
         std::isfinite(ymax) && xmin < xmax && ymin < ymax;
}

void GroundTruth::validate(int num_classes) const {
  if (boxes.size() != labels.size()) {
    throw std::invalid_argument("GroundTruth: " + std::to_string(boxes.size()) +
                                " boxes but " + std::to_string(labels.size()) +
                                " labels");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!boxes[i].valid()) {
      throw std::invalid_argument("GroundTruth: box " + std::to_string(i) +
                                  " is degenerate or non-finite");
    }
    if (labels[i] < 1 || labels[i] > num_classes) {
      throw std::invalid_argument("GroundTruth: label " +
                                  std::to_string(labels[i]) +
                                  " outside 1.." + std::to_string(num_classes));
    }
  }
}

}  // namespace tdsr

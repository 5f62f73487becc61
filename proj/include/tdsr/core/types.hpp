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

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdsr {

/// Class index. 0 is background; object classes are 1..C.
using ClassId = int;

inline constexpr ClassId kBackground = 0;

/// Raised when a computation produces NaN/Inf where finite values are required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Planar (channel-major) image with real values, nominally in [0,1].
///
/// The layout matches nn::Tensor's CHW layout so conversions are plain
/// copies. Range is not enforced on construction; degradation ops clamp,
/// network outputs may leave the range until they are clamped for metrics.
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, double fill = 0.0);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }

  /// Clamp every value to [0,1] in place.
  Image& clamp01();
  Image clamped() const;

  bool operator==(const Image& other) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Axis-aligned box in continuous pixel coordinates, origin top-left.
struct Box {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (xmin + xmax); }
  double center_y() const { return 0.5 * (ymin + ymax); }

  /// Finite coordinates with xmin < xmax and ymin < ymax.
  bool valid() const;

  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  bool operator==(const Box&) const = default;
};

struct GroundTruth {
  std::vector<Box> boxes;
  std::vector<ClassId> labels;

  std::size_t size() const { return boxes.size(); }
  bool empty() const { return boxes.empty(); }

  /// Throws std::invalid_argument if the invariants do not hold
  /// (equal lengths, valid boxes, labels in 1..num_classes).
  void validate(int num_classes) const;

  bool operator==(const GroundTruth&) const = default;
};

struct Detection {
  Box box;
  ClassId label = 1;
  double score = 0.0;

  bool operator==(const Detection&) const = default;
};

using DetectionSet = std::vector<Detection>;

/// One annotated HR image of a dataset.
struct Sample {
  std::string id;
  Image image;
  GroundTruth gt;
};

}  // namespace tdsr

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

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "tdsr/core/types.hpp"

namespace tdsr::data {

struct RenderOptions {
  /// Nearest-neighbour enlargement applied before drawing.
  int zoom = 1;
  std::vector<std::string> class_names;  // index 0 is class 1
  bool show_scores = true;
};

/// Draws each detection as a coloured rectangle with a "label score" tag
/// and, when given, ground truth as thin white rectangles. A one-pixel grey
/// frame marks the image border.
Image render_detections(const Image& img, const DetectionSet& dets, const GroundTruth* gt = nullptr,
                        const RenderOptions& options = {});

/// Side-by-side strip of equally tall panels with a caption under each.
Image make_panel(const std::vector<std::pair<std::string, Image>>& panels);

/// Colour used for a class id (RGB in [0,1]).
std::array<double, 3> class_color(ClassId label);

}  // namespace tdsr::data

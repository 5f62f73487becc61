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

#include "tdsr/core/types.hpp"

namespace tdsr {

/// Jaccard overlap with continuous areas (no +1 pixel convention).
/// Throws std::invalid_argument on a degenerate box.
double iou(const Box& a, const Box& b);

/// Scaling applied to center and size offsets (SSD convention).
struct Variances {
  double center = 0.1;
  double size = 0.2;

  bool operator==(const Variances&) const = default;
};

/// Regression target of a box relative to an anchor.
struct BoxOffsets {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BoxOffsets&) const = default;
};

BoxOffsets encode_box(const Box& gt, const Box& anchor, Variances v = {});

/// Inverse of encode_box. Throws NumericalError if the decoded box has a
/// non-positive or non-finite extent.
Box decode_box(const BoxOffsets& offsets, const Box& anchor, Variances v = {});

/// Greedy score-descending hard NMS. A detection is suppressed when its IoU
/// with an already kept detection (of the same class if per_class) exceeds
/// iou_threshold. Output is sorted by descending score.
DetectionSet nms(const DetectionSet& dets, double iou_threshold,
                 bool per_class = true);

}  // namespace tdsr

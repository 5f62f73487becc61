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

#include "tdsr/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tdsr {

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) {
    throw std::invalid_argument("iou: degenerate box");
  }
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoxOffsets encode_box(const Box& gt, const Box& anchor, Variances v) {
  if (!gt.valid() || !anchor.valid()) {
    throw std::invalid_argument("encode_box: degenerate box");
  }
  if (!(v.center > 0.0) || !(v.size > 0.0)) {
    throw std::invalid_argument("encode_box: variances must be positive");
  }
  const double aw = anchor.width();
  const double ah = anchor.height();
  return {(gt.center_x() - anchor.center_x()) / (aw * v.center),
          (gt.center_y() - anchor.center_y()) / (ah * v.center),
          std::log(gt.width() / aw) / v.size,
          std::log(gt.height() / ah) / v.size};
}

Box decode_box(const BoxOffsets& offsets, const Box& anchor, Variances v) {
  if (!anchor.valid()) {
    throw std::invalid_argument("decode_box: degenerate anchor");
  }
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double cx = anchor.center_x() + offsets.cx * v.center * aw;
  const double cy = anchor.center_y() + offsets.cy * v.center * ah;
  const double w = aw * std::exp(offsets.w * v.size);
  const double h = ah * std::exp(offsets.h * v.size);
  Box out = Box::from_center(cx, cy, w, h);
  if (!(w > 0.0) || !(h > 0.0) || !out.valid()) {
    throw NumericalError("decode_box: decoded box has non-positive extent");
  }
  return out;
}

DetectionSet nms(const DetectionSet& dets, double iou_threshold,
                 bool per_class) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw std::invalid_argument("nms: iou_threshold must be in (0,1]");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  DetectionSet kept;
  for (std::size_t idx : order) {
    const Detection& cand = dets[idx];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (per_class && k.label != cand.label) continue;
      if (iou(k.box, cand.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace tdsr

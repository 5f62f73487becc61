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

#include "tdsr/data/render.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

#include "tdsr/data/image_io.hpp"

namespace tdsr::data {

std::array<double, 3> class_color(ClassId label) {
  static constexpr std::array<std::array<double, 3>, 6> kPalette{{
      {0.90, 0.10, 0.10},
      {0.10, 0.70, 0.20},
      {0.15, 0.35, 0.95},
      {0.95, 0.75, 0.05},
      {0.80, 0.20, 0.85},
      {0.05, 0.80, 0.85},
  }};
  return kPalette[static_cast<std::size_t>(std::max(label - 1, 0)) % kPalette.size()];
}

namespace {

cv::Scalar bgr(const std::array<double, 3>& rgb) {
  return {std::round(rgb[2] * 255.0), std::round(rgb[1] * 255.0), std::round(rgb[0] * 255.0)};
}

cv::Rect to_rect(const Box& b, int zoom) {
  const int x0 = static_cast<int>(std::lround(b.xmin * zoom));
  const int y0 = static_cast<int>(std::lround(b.ymin * zoom));
  const int x1 = static_cast<int>(std::lround(b.xmax * zoom)) - 1;
  const int y1 = static_cast<int>(std::lround(b.ymax * zoom)) - 1;
  // cv::rectangle draws the last row/column of the Rect, i.e. x1 and y1.
  return {x0, y0, std::max(x0, x1) - x0 + 1, std::max(y0, y1) - y0 + 1};
}

}  // namespace

Image render_detections(const Image& img, const DetectionSet& dets, const GroundTruth* gt,
                        const RenderOptions& options) {
  if (options.zoom < 1) throw std::invalid_argument("render_detections: zoom must be >= 1");
  cv::Mat canvas = to_mat(img);
  if (canvas.channels() == 1) cv::cvtColor(canvas, canvas, cv::COLOR_GRAY2BGR);
  if (options.zoom > 1) {
    cv::resize(canvas, canvas, {}, options.zoom, options.zoom, cv::INTER_NEAREST);
  }
  cv::rectangle(canvas, cv::Rect(0, 0, canvas.cols, canvas.rows), cv::Scalar(128, 128, 128), 1);

  if (gt != nullptr) {
    for (const Box& b : gt->boxes) {
      cv::rectangle(canvas, to_rect(b, options.zoom), cv::Scalar(255, 255, 255), 1);
    }
  }
  const double font_scale = 0.3 * std::max(1, options.zoom / 2);
  for (const Detection& d : dets) {
    const cv::Scalar color = bgr(class_color(d.label));
    const cv::Rect r = to_rect(d.box, options.zoom);
    cv::rectangle(canvas, r, color, 1);
    std::string tag = d.label >= 1 && d.label <= static_cast<int>(options.class_names.size())
                          ? options.class_names[d.label - 1]
                          : std::to_string(d.label);
    if (options.show_scores) {
      char score[16];
      std::snprintf(score, sizeof score, " %.2f", d.score);
      tag += score;
    }
    int baseline = 0;
    const cv::Size ts = cv::getTextSize(tag, cv::FONT_HERSHEY_SIMPLEX, font_scale, 1, &baseline);
    const cv::Point origin(r.x, std::max(ts.height + 1, r.y - 1));
    cv::rectangle(canvas, cv::Rect(origin.x, origin.y - ts.height - 1, ts.width + 2, ts.height + 2),
                  color, cv::FILLED);
    cv::putText(canvas, tag, {origin.x + 1, origin.y}, cv::FONT_HERSHEY_SIMPLEX, font_scale,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  return from_mat(canvas);
}

Image make_panel(const std::vector<std::pair<std::string, Image>>& panels) {
  if (panels.empty()) throw std::invalid_argument("make_panel: no panels");
  constexpr int kGap = 4;
  constexpr int kCaption = 18;
  const int height = panels.front().second.height();
  int width = kGap;
  for (const auto& [caption, img] : panels) {
    if (img.height() != height) throw std::invalid_argument("make_panel: panels differ in height");
    width += img.width() + kGap;
  }
  cv::Mat strip(height + kCaption + kGap, width, CV_8UC3, cv::Scalar(255, 255, 255));
  int x = kGap;
  for (const auto& [caption, img] : panels) {
    const Image rgb = img.channels() == 3 ? img : render_detections(img, {});
    to_mat(rgb).copyTo(strip(cv::Rect(x, 0, img.width(), height)));
    cv::putText(strip, caption, {x, height + kCaption - 5}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    x += img.width() + kGap;
  }
  return from_mat(strip);
}

}  // namespace tdsr::data

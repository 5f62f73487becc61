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

#include "tdsr/data/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace tdsr::data {

std::vector<std::int64_t> infer_boundaries(std::span<const train::MetricsRecord> records) {
  std::vector<std::int64_t> out;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].alpha != records[i - 1].alpha || records[i].beta != records[i - 1].beta) {
      out.push_back(records[i - 1].iteration);
    }
  }
  return out;
}

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 480;
constexpr int kLeft = 70;
constexpr int kRight = 730;
constexpr int kTop = 40;
constexpr int kBottom = 420;

const cv::Scalar kMapColor(200, 80, 20);    // blue-ish (BGR)
const cv::Scalar kPsnrColor(30, 30, 200);   // red-ish
const cv::Scalar kAxisColor(0, 0, 0);
const cv::Scalar kMarkerColor(120, 120, 120);

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return lo > hi; }
  void pad() {
    if (empty()) {
      lo = 0.0;
      hi = 1.0;
    }
    const double span = hi - lo;
    const double margin = span > 0.0 ? 0.08 * span : std::max(0.5, 0.05 * std::abs(hi));
    lo -= margin;
    hi += margin;
  }
  int to_y(double v) const {
    return kBottom - static_cast<int>(std::lround((v - lo) / (hi - lo) * (kBottom - kTop)));
  }
};

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void dashed_vline(cv::Mat& img, int x) {
  for (int y = kTop; y < kBottom; y += 8) {
    cv::line(img, {x, y}, {x, std::min(y + 4, kBottom)}, kMarkerColor, 1);
  }
}

}  // namespace

PlotLayout plot_curves(std::span<const train::MetricsRecord> records,
                       std::span<const std::int64_t> boundaries,
                       const std::filesystem::path& out_png) {
  if (records.empty()) throw std::runtime_error("plot_curves: no records");
  std::int64_t x_lo = 0;
  std::int64_t x_hi = 1;
  Range map_range;
  Range psnr_range;
  for (const auto& r : records) {
    x_hi = std::max(x_hi, r.iteration);
    map_range.add(r.map);
    psnr_range.add(r.psnr);
  }
  map_range.pad();
  psnr_range.pad();
  auto to_x = [&](std::int64_t it) {
    return kLeft + static_cast<int>(std::lround(static_cast<double>(it - x_lo) /
                                                static_cast<double>(x_hi - x_lo) *
                                                (kRight - kLeft)));
  };

  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  PlotLayout layout{kWidth, kHeight, kLeft, kRight, kTop, kBottom, {}, {}, {}, {}};

  for (std::int64_t b : boundaries) {
    if (b < x_lo || b > x_hi) continue;
    const int x = to_x(b);
    dashed_vline(img, x);
    layout.boundary_iterations.push_back(b);
    layout.boundary_x.push_back(x);
  }

  cv::rectangle(img, cv::Point(kLeft, kTop), cv::Point(kRight, kBottom), kAxisColor, 1);
  for (int t = 0; t <= 4; ++t) {
    const int y = kBottom - t * (kBottom - kTop) / 4;
    const double fm = map_range.lo + t * (map_range.hi - map_range.lo) / 4;
    const double fp = psnr_range.lo + t * (psnr_range.hi - psnr_range.lo) / 4;
    cv::line(img, {kLeft - 4, y}, {kLeft, y}, kAxisColor, 1);
    cv::line(img, {kRight, y}, {kRight + 4, y}, kAxisColor, 1);
    cv::putText(img, label(fm), {6, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, kMapColor, 1,
                cv::LINE_AA);
    cv::putText(img, label(fp), {kRight + 8, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, kPsnrColor,
                1, cv::LINE_AA);
  }
  for (int t = 0; t <= 5; ++t) {
    const std::int64_t it = x_lo + (x_hi - x_lo) * t / 5;
    const int x = to_x(it);
    cv::line(img, {x, kBottom}, {x, kBottom + 4}, kAxisColor, 1);
    cv::putText(img, std::to_string(it), {x - 12, kBottom + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                kAxisColor, 1, cv::LINE_AA);
  }
  cv::putText(img, "iteration", {kWidth / 2 - 30, kHeight - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
              kAxisColor, 1, cv::LINE_AA);
  cv::putText(img, "mAP (%)", {kLeft, kTop - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5, kMapColor, 1,
              cv::LINE_AA);
  cv::putText(img, "PSNR (dB)", {kRight - 80, kTop - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
              kPsnrColor, 1, cv::LINE_AA);

  auto draw_series = [&](auto value, const Range& range, const cv::Scalar& color,
                         std::vector<std::pair<int, int>>& points) {
    for (const auto& r : records) {
      const double v = value(r);
      if (std::isfinite(v)) points.emplace_back(to_x(r.iteration), range.to_y(v));
    }
    for (std::size_t i = 1; i < points.size(); ++i) {
      cv::line(img, {points[i - 1].first, points[i - 1].second},
               {points[i].first, points[i].second}, color, 2, cv::LINE_AA);
    }
    for (const auto& [x, y] : points) cv::circle(img, {x, y}, 3, color, cv::FILLED, cv::LINE_AA);
  };
  draw_series([](const train::MetricsRecord& r) { return r.map; }, map_range, kMapColor,
              layout.map_points);
  draw_series([](const train::MetricsRecord& r) { return r.psnr; }, psnr_range, kPsnrColor,
              layout.psnr_points);

  if (!cv::imwrite(out_png.string(), img)) {
    throw std::runtime_error("cannot write " + out_png.string());
  }
  return layout;
}

PlotLayout plot_curves(const std::filesystem::path& metrics_csv,
                       const std::filesystem::path& out_png) {
  const auto records = train::read_metrics_csv(metrics_csv);
  if (records.empty()) throw std::runtime_error(metrics_csv.string() + ": no metric records");
  const auto boundaries = infer_boundaries(records);
  return plot_curves(records, boundaries, out_png);
}

}  // namespace tdsr::data

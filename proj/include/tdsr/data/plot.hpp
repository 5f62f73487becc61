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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tdsr/trainer.hpp"

namespace tdsr::data {

/// Where plot_curves put things, in output pixel coordinates.
struct PlotLayout {
  int width = 0;
  int height = 0;
  int plot_left = 0;
  int plot_right = 0;
  int plot_top = 0;
  int plot_bottom = 0;
  std::vector<std::pair<int, int>> map_points;   // one per record with a finite mAP
  std::vector<std::pair<int, int>> psnr_points;  // one per record with a finite PSNR
  std::vector<std::int64_t> boundary_iterations;
  std::vector<int> boundary_x;
};

/// Iterations at which (alpha, beta) changes between consecutive records.
/// Records carry the weights of their last completed iteration, so the
/// boundary is the iteration of the earlier record.
std::vector<std::int64_t> infer_boundaries(std::span<const train::MetricsRecord> records);

/// mAP (left axis) and PSNR (right axis) against iteration, with dashed
/// vertical markers at schedule boundaries. Writes a PNG.
PlotLayout plot_curves(std::span<const train::MetricsRecord> records,
                       std::span<const std::int64_t> boundaries,
                       const std::filesystem::path& out_png);

/// Reads a metrics CSV and plots it with inferred boundaries. Throws
/// std::runtime_error on a CSV without records.
PlotLayout plot_curves(const std::filesystem::path& metrics_csv,
                       const std::filesystem::path& out_png);

}  // namespace tdsr::data

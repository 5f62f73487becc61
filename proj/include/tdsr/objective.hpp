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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tdsr/core/types.hpp"
#include "tdsr/detector.hpp"
#include "tdsr/sr_network.hpp"

namespace tdsr::objective {

struct LossWeights {
  double alpha = 1.0;  // reconstruction
  double beta = 0.0;   // detection task
  double lambda = 1.0; // localization weight inside the task loss

  /// Throws std::invalid_argument on negative or non-finite weights.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct ScheduleSegment {
  std::int64_t iterations = 0;
  LossWeights weights;

  bool operator==(const ScheduleSegment&) const = default;
};

/// Piecewise-constant loss weights. Segment i covers the half-open range
/// [start_i, start_i + iterations_i).
struct Schedule {
  std::vector<ScheduleSegment> segments;

  std::int64_t total() const;
  /// First iteration of every segment.
  std::vector<std::int64_t> boundaries() const;
  /// Iteration counts divided by divisor (rounded, at least 1 unless the
  /// segment was empty). Weights are unchanged.
  Schedule scaled(std::int64_t divisor) const;
  /// Canonical text, e.g. "100000:1:0+200000:1:0.01".
  std::string to_string() const;

  bool operator==(const Schedule&) const = default;
};

class ScheduleParseError : public std::invalid_argument {
 public:
  ScheduleParseError(std::size_t segment, std::string text, const std::string& reason);

  /// Zero-based; the message counts from 1.
  std::size_t segment() const { return segment_; }
  const std::string& text() const { return text_; }

 private:
  std::size_t segment_;
  std::string text_;
};

/// Grammar: COUNT ":" REAL ":" REAL, joined by "+". COUNT takes an optional
/// "k" suffix (x1000). A zero count is accepted so that an untrained row
/// ("0k:1:0") can be expressed; weights_at never lands in such a segment.
Schedule parse_schedule(std::string_view text);

/// Weights of the segment containing iteration. Throws std::out_of_range
/// unless 0 <= iteration < total.
LossWeights weights_at(const Schedule& schedule, std::int64_t iteration);

struct CompoundLoss {
  double total = 0.0;  // alpha * rec + beta * task
  double rec = 0.0;
  double task = 0.0;
  int num_matched = 0;
  bool task_skipped = false;  // no anchor matched any box
};

/// Loss of one training example: x is the clean HR target with boxes y,
/// x_lr the degraded network input. Both terms share one SR forward pass.
CompoundLoss compound_loss(const Image& x, const GroundTruth& y, const Image& x_lr,
                           const sr::SRModel& sr, const det::DetectorModel& det,
                           const LossWeights& w);

/// Same as compound_loss, and accumulates alpha * dL_rec/dtheta +
/// beta * dL_task/dtheta into sr.params() grads by back-propagating through
/// the frozen detector. The detector must be frozen (std::logic_error
/// otherwise). Throws NumericalError if any accumulated gradient is not
/// finite.
CompoundLoss compound_gradient(const Image& x, const GroundTruth& y, const Image& x_lr,
                               sr::SRModel& sr, const det::DetectorModel& det,
                               const LossWeights& w);

}  // namespace tdsr::objective

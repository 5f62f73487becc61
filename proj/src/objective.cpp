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

#include "tdsr/objective.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "tdsr/nn/tape.hpp"

namespace tdsr::objective {

void LossWeights::validate() const {
  for (double v : {alpha, beta, lambda}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
    }
  }
}

std::int64_t Schedule::total() const {
  std::int64_t t = 0;
  for (const auto& s : segments) t += s.iterations;
  return t;
}

std::vector<std::int64_t> Schedule::boundaries() const {
  std::vector<std::int64_t> out;
  std::int64_t start = 0;
  for (const auto& s : segments) {
    out.push_back(start);
    start += s.iterations;
  }
  return out;
}

Schedule Schedule::scaled(std::int64_t divisor) const {
  if (divisor < 1) throw std::invalid_argument("Schedule::scaled: divisor must be >= 1");
  Schedule out = *this;
  for (auto& s : out.segments) {
    if (s.iterations == 0) continue;
    s.iterations = std::max<std::int64_t>(1, (s.iterations + divisor / 2) / divisor);
  }
  return out;
}

namespace {

std::string format_real(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string Schedule::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (i > 0) out += '+';
    if (s.iterations > 0 && s.iterations % 1000 == 0) {
      out += std::to_string(s.iterations / 1000) + "k";
    } else {
      out += std::to_string(s.iterations);
    }
    out += ':' + format_real(s.weights.alpha) + ':' + format_real(s.weights.beta);
  }
  return out;
}

ScheduleParseError::ScheduleParseError(std::size_t segment, std::string text,
                                       const std::string& reason)
    : std::invalid_argument("schedule segment " + std::to_string(segment + 1) + " '" + text +
                            "': " + reason),
      segment_(segment),
      text_(std::move(text)) {}

namespace {

std::int64_t parse_count(std::string_view field, std::size_t index, std::string_view seg) {
  std::int64_t multiplier = 1;
  if (!field.empty() && (field.back() == 'k' || field.back() == 'K')) {
    multiplier = 1000;
    field.remove_suffix(1);
  }
  std::int64_t n = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), n);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || n < 0) {
    throw ScheduleParseError(index, std::string(seg), "bad iteration count");
  }
  if (n > INT64_MAX / multiplier) {
    throw ScheduleParseError(index, std::string(seg), "iteration count overflows");
  }
  return n * multiplier;
}

double parse_weight(std::string_view field, std::size_t index, std::string_view seg,
                    const char* name) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ScheduleParseError(index, std::string(seg), std::string("bad ") + name);
  }
  if (!std::isfinite(v) || v < 0.0) {
    throw ScheduleParseError(index, std::string(seg), std::string(name) + " must be >= 0");
  }
  return v;
}

}  // namespace

Schedule parse_schedule(std::string_view text) {
  Schedule schedule;
  std::size_t index = 0;
  std::size_t pos = 0;
  while (true) {
    const std::size_t plus = text.find('+', pos);
    const std::string_view seg =
        trim(text.substr(pos, plus == std::string_view::npos ? std::string_view::npos : plus - pos));
    if (seg.empty()) throw ScheduleParseError(index, "", "empty segment");

    std::array<std::string_view, 3> fields;
    std::size_t f = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t colon = seg.find(':', start);
      if (f == fields.size()) throw ScheduleParseError(index, std::string(seg), "too many fields");
      fields[f++] = trim(seg.substr(start, colon == std::string_view::npos
                                               ? std::string_view::npos
                                               : colon - start));
      if (colon == std::string_view::npos) break;
      start = colon + 1;
    }
    if (f != fields.size()) {
      throw ScheduleParseError(index, std::string(seg), "expected COUNT:ALPHA:BETA");
    }
    ScheduleSegment s;
    s.iterations = parse_count(fields[0], index, seg);
    s.weights.alpha = parse_weight(fields[1], index, seg, "alpha");
    s.weights.beta = parse_weight(fields[2], index, seg, "beta");
    if (s.iterations > 0 && s.weights.alpha == 0.0 && s.weights.beta == 0.0) {
      throw ScheduleParseError(index, std::string(seg), "alpha and beta are both zero");
    }
    schedule.segments.push_back(s);
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
    ++index;
  }
  return schedule;
}

LossWeights weights_at(const Schedule& schedule, std::int64_t iteration) {
  if (iteration >= 0) {
    std::int64_t end = 0;
    for (const auto& s : schedule.segments) {
      end += s.iterations;
      if (iteration < end) return s.weights;
    }
  }
  throw std::out_of_range("weights_at: iteration " + std::to_string(iteration) +
                          " outside [0, " + std::to_string(schedule.total()) + ")");
}

namespace {

CompoundLoss run(const Image& x, const GroundTruth& y, const Image& x_lr, sr::SRModel& sr,
                 const det::DetectorModel& det, const LossWeights& w, bool with_grad) {
  w.validate();
  nn::Tape tape;
  const nn::Var out = sr::sr_forward(tape, sr, x_lr, with_grad);
  const nn::Tensor& x_hat = tape.value(out);
  if (x_hat.dim(1) != x.height() || x_hat.dim(2) != x.width()) {
    throw std::invalid_argument("compound loss: SR output " + nn::shape_string(x_hat.shape()) +
                                " does not match the HR target");
  }
  // Inference-only binding never writes to the detector.
  auto& det_ref = const_cast<det::DetectorModel&>(det);
  const det::DetectorHeads heads = det::detector_forward(tape, det_ref, out, false);

  det::LossConfig loss_cfg;
  loss_cfg.lambda = w.lambda;
  const det::DetectionLoss task =
      det::detection_loss(tape.value(heads.class_logits), tape.value(heads.offsets),
                          det.anchors(), y, loss_cfg, det.config().variances);

  CompoundLoss loss;
  loss.rec = sr::rec_loss(x, nn::to_image(x_hat));
  loss.task = task.task;
  loss.num_matched = task.num_matched;
  loss.task_skipped = task.skipped;
  loss.total = w.alpha * loss.rec + w.beta * loss.task;

  if (with_grad) {
    std::vector<nn::Tape::Seed> seeds;
    if (w.alpha != 0.0) {
      nn::Tensor g = sr::rec_loss_grad(x, x_hat);
      g *= w.alpha;
      seeds.push_back({out, std::move(g)});
    }
    if (w.beta != 0.0 && !task.skipped) {
      nn::Tensor gl = task.grad_logits;
      nn::Tensor go = task.grad_offsets;
      gl *= w.beta;
      go *= w.beta;
      seeds.push_back({heads.class_logits, std::move(gl)});
      seeds.push_back({heads.offsets, std::move(go)});
    }
    tape.backward(seeds);
    if (!sr.params().grads_finite()) {
      throw NumericalError("compound_gradient: non-finite SR gradient");
    }
  }
  return loss;
}

}  // namespace

CompoundLoss compound_loss(const Image& x, const GroundTruth& y, const Image& x_lr,
                           const sr::SRModel& sr, const det::DetectorModel& det,
                           const LossWeights& w) {
  // Non-trainable binding only reads parameters.
  return run(x, y, x_lr, const_cast<sr::SRModel&>(sr), det, w, false);
}

CompoundLoss compound_gradient(const Image& x, const GroundTruth& y, const Image& x_lr,
                               sr::SRModel& sr, const det::DetectorModel& det,
                               const LossWeights& w) {
  if (!det.frozen()) throw std::logic_error("compound_gradient: detector is not frozen");
  return run(x, y, x_lr, sr, det, w, true);
}

}  // namespace tdsr::objective

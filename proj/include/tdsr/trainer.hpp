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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tdsr/checkpoint.hpp"
#include "tdsr/core/types.hpp"
#include "tdsr/degradation.hpp"
#include "tdsr/detector.hpp"
#include "tdsr/metrics.hpp"
#include "tdsr/objective.hpp"
#include "tdsr/sr_network.hpp"

namespace tdsr::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are created lazily on the first step
/// and must keep matching the parameter layout afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(nn::ParameterStore& params, double lr);

  std::int64_t steps() const { return step_; }
  const std::vector<nn::Tensor>& first_moments() const { return m_; }
  const std::vector<nn::Tensor>& second_moments() const { return v_; }

  /// Moments as parameter stores named after params (for checkpoints).
  nn::ParameterStore export_moments(const nn::ParameterStore& params, bool second) const;
  void import_state(std::int64_t steps, const nn::ParameterStore& m, const nn::ParameterStore& v);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<nn::Tensor> m_;
  std::vector<nn::Tensor> v_;
};

/// base * factor^floor(iteration / decay_every).
double learning_rate(double base, std::int64_t decay_every, double factor,
                     std::int64_t iteration);

/// Rescales gradients so their global L2 norm is at most max_norm and
/// returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(nn::ParameterStore& params, double max_norm);

/// Mirror an image and its boxes left-right.
Sample hflip(const Sample& s);

struct TrainConfig {
  objective::Schedule schedule;
  double base_lr = 1e-4;
  std::int64_t lr_decay_every = 100000;
  double lr_decay_factor = 0.1;
  int batch_size = 6;
  AdamConfig adam;
  double clip_norm = 10.0;
  /// Iterations between metric records; 0 disables evaluation.
  std::int64_t eval_every = 1000;
  std::uint64_t seed = 0;
  degradation::DegradationSpec degradation;
  double lambda = 1.0;
  bool hflip = true;
  /// Random square HR crop per sample; 0 keeps the full image.
  int crop_size = 0;

  void validate() const;
  /// Hash of every field except the schedule that influences the
  /// trajectory. Checkpoints store the schedule separately so a run can
  /// continue under a schedule that extends the one it was saved with.
  std::uint64_t fingerprint() const;
};

inline constexpr const char* kMetricsHeader = "iteration,alpha,beta,loss_rec,loss_task,psnr,map";

struct MetricsRecord {
  std::int64_t iteration = 0;  // completed iterations
  double alpha = 0.0;
  double beta = 0.0;
  double loss_rec = 0.0;
  double loss_task = 0.0;
  double psnr = 0.0;
  double map = 0.0;  // percent

  bool operator==(const MetricsRecord&) const = default;
};

/// Shortest round-trip decimal formatting; NaN prints as "nan".
std::string format_record(const MetricsRecord& r);
MetricsRecord parse_record(const std::string& line);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records);
/// Appends one record (the file must already carry the header).
void log_metrics(const std::filesystem::path& path, const MetricsRecord& record);

struct RunOptions {
  /// Held-out samples for the metric records.
  std::span<const Sample> eval_samples;
  metrics::EvalOptions eval;
  /// Metrics CSV; empty disables the log.
  std::filesystem::path metrics_csv;
  /// Written every checkpoint_every iterations, at the end, and before a
  /// numerical abort. Empty disables checkpoints.
  std::filesystem::path checkpoint;
  std::int64_t checkpoint_every = 0;
  /// Stop once this many iterations are complete (-1: run the schedule).
  std::int64_t stop_after = -1;
  /// Continue from this state instead of iteration 0. The schedule must
  /// agree with the checkpoint's over the iterations already run.
  const Checkpoint* resume = nullptr;
  std::function<void(const MetricsRecord&)> on_record;
};

struct TrainResult {
  std::int64_t iterations = 0;  // completed at return
  std::vector<double> losses;   // batch-mean compound loss per iteration run
  std::vector<MetricsRecord> records;
};

/// Schedule-driven SR training. Each iteration draws batch_size samples,
/// degrades them, accumulates compound_gradient at weights_at(iteration)
/// and takes one Adam step on the SR parameters. det may be null only when
/// every segment has beta == 0; a non-null det must be frozen.
TrainResult train_sr(sr::SRModel& sr, const det::DetectorModel* det,
                     std::span<const Sample> train, const TrainConfig& config,
                     const RunOptions& options = {});

/// Reconstruction-only fine-tuning. Rejects schedules with beta > 0.
TrainResult pretrain_sr(sr::SRModel& sr, std::span<const Sample> train,
                        const TrainConfig& config, const RunOptions& options = {},
                        const det::DetectorModel* det = nullptr);

/// Joint training against a frozen detector.
TrainResult train_tdsr(sr::SRModel& sr, const det::DetectorModel& det,
                       std::span<const Sample> train, const TrainConfig& config,
                       const RunOptions& options = {});

/// Metric record for the current SR model on held-out samples.
MetricsRecord evaluate_record(const sr::SRModel& sr, const det::DetectorModel* det,
                              std::span<const Sample> samples, const TrainConfig& config,
                              const metrics::EvalOptions& options, std::int64_t iteration,
                              const objective::LossWeights& weights);

/// Training state of a run as stored in its checkpoint.
Checkpoint make_checkpoint(const sr::SRModel& sr, const det::DetectorModel* det,
                           const Adam& adam, const TrainConfig& config, std::int64_t iteration);

struct DetTrainConfig {
  std::int64_t iterations = 4000;
  int batch_size = 8;
  double base_lr = 1e-3;
  std::int64_t lr_decay_every = 3000;
  double lr_decay_factor = 0.1;
  AdamConfig adam;
  double clip_norm = 10.0;
  std::uint64_t seed = 0;
  bool hflip = true;
  det::LossConfig loss;

  void validate() const;
};

struct DetTrainResult {
  std::vector<double> losses;  // batch-mean task loss per iteration
};

/// Trains the detector on clean HR samples, then freezes it. On a
/// non-finite loss the current weights are written to abort_checkpoint (if
/// set) and NumericalError is thrown.
DetTrainResult pretrain_detector(det::DetectorModel& det, std::span<const Sample> train,
                                 const DetTrainConfig& config,
                                 const std::filesystem::path& abort_checkpoint = {});

}  // namespace tdsr::train

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
#include <stdexcept>
#include <string>
#include <string_view>

#include "tdsr/sr_network.hpp"
#include "tdsr/trainer.hpp"

namespace tdsr::train {

/// Plain-text `key = value` experiment description. Values may be quoted;
/// `#` starts a comment. Iteration counts in `schedule` and
/// `lr_decay_every` are in full-scale units and divided by `iter_divisor`;
/// `eval_every` and `checkpoint_every` count executed iterations.
struct ExperimentConfig {
  std::string schedule = "100k:1:0";
  std::int64_t iter_divisor = 1;
  int scale_factor = 4;
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  double base_lr = 1e-4;
  std::int64_t lr_decay_every = 100000;
  double lr_decay_factor = 0.1;
  int batch_size = 6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;
  double lambda = 1.0;
  bool hflip = true;
  int crop_size = 0;
  std::int64_t eval_every = 1000;
  std::int64_t checkpoint_every = 0;

  std::filesystem::path train_data;
  std::filesystem::path eval_data;
  int eval_limit = 0;  // 0: every eval sample
  std::filesystem::path detector;
  std::filesystem::path init_sr;
  std::filesystem::path out_dir = ".";

  int sr_pairs = 2;
  int sr_width = 16;
  bool bicubic_residual = true;

  std::int64_t det_iterations = 4000;
  int det_batch_size = 8;
  double det_lr = 1e-3;
  std::int64_t det_lr_decay_every = 3000;
  int det_base_width = 16;

  /// Desk-scale TrainConfig: schedule and decay interval divided by
  /// iter_divisor.
  TrainConfig train_config() const;
  DetTrainConfig det_train_config() const;
  sr::SRConfig sr_config() const;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

/// Relative paths are resolved against base_dir.
ExperimentConfig parse_experiment_config(std::string_view text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace tdsr::train

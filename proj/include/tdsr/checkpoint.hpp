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
#include <string>
#include <utility>
#include <vector>

#include "tdsr/detector.hpp"
#include "tdsr/nn/parameters.hpp"
#include "tdsr/sr_network.hpp"

namespace tdsr::train {

/// Versioned binary container: magic "TDSRCKPT", u32 version, then the
/// fields below in order. Integers are little-endian, tensors raw doubles.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::int64_t iteration = 0;
  std::uint64_t config_fingerprint = 0;
  std::string rng_state;
  /// JSON object describing the stored models.
  std::string meta;
  std::int64_t adam_step = 0;
  /// Named parameter groups such as "sr", "det", "adam.m", "adam.v".
  std::vector<std::pair<std::string, nn::ParameterStore>> sections;

  const nn::ParameterStore* find(const std::string& name) const;
  nn::ParameterStore& add(const std::string& name, nn::ParameterStore store);
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws std::runtime_error on a missing, truncated or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Model architecture <-> JSON, as stored in Checkpoint::meta.
std::string sr_config_json(const sr::SRConfig& cfg);
sr::SRConfig sr_config_from_json(const std::string& text);
std::string detector_config_json(const det::DetectorConfig& cfg);
det::DetectorConfig detector_config_from_json(const std::string& text);

/// Standalone model files (a checkpoint with a single section).
void save_sr(const std::filesystem::path& path, const sr::SRModel& model);
sr::SRModel load_sr(const std::filesystem::path& path);
/// Loaded detectors come back frozen.
void save_detector(const std::filesystem::path& path, const det::DetectorModel& model);
det::DetectorModel load_detector(const std::filesystem::path& path);

/// Copies values of a stored section into a model's parameters; names and
/// shapes must match exactly.
void restore_parameters(nn::ParameterStore& dst, const nn::ParameterStore& src);

}  // namespace tdsr::train

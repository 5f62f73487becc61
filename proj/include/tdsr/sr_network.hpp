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

#include "tdsr/core/types.hpp"
#include "tdsr/nn/parameters.hpp"
#include "tdsr/nn/tape.hpp"

namespace tdsr::sr {

/// Kernel geometry shared by every layer of a projection unit.
struct ProjectionUnitSpec {
  int kernel = 8;
  int stride = 4;
  int padding = 2;

  bool operator==(const ProjectionUnitSpec&) const = default;
};

/// (6,2,2) for 2x, (8,4,2) for 4x, (12,8,2) for 8x.
ProjectionUnitSpec projection_spec(int scale_factor);

struct SRConfig {
  int scale_factor = 4;
  /// Number of up-projection stages; a down-projection sits between each
  /// pair of consecutive up-projections.
  int num_projection_pairs = 2;
  int feature_width = 16;
  int channels = 3;
  /// Add the bicubic enlargement of the input to the reconstruction.
  bool bicubic_residual = true;
  double slope = 0.2;

  void validate() const;
  bool operator==(const SRConfig&) const = default;
};

/// Back-projection super-resolution network and its parameters.
class SRModel {
 public:
  SRModel(SRConfig config, nn::ParameterStore params);

  const SRConfig& config() const { return config_; }
  ProjectionUnitSpec projection() const { return projection_spec(config_.scale_factor); }
  int scale_factor() const { return config_.scale_factor; }

  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

 private:
  SRConfig config_;
  nn::ParameterStore params_;
};

SRModel build_sr(const SRConfig& config, std::uint64_t seed);
SRModel build_sr(int scale_factor, int pairs, int width, std::uint64_t seed);

/// Tape handles for the three layers of one projection unit.
struct ProjectionWeights {
  nn::Var w1, b1;
  nn::Var w2, b2;
  nn::Var w3, b3;
};

/// H0 = up(L); L0 = down(H0); H1 = up(L0 - L); returns H0 + H1.
nn::Var up_projection(nn::Tape& tape, const ProjectionWeights& w,
                      const ProjectionUnitSpec& spec, double slope, nn::Var lr);

/// L0 = down(H); H0 = up(L0); L1 = down(H0 - H); returns L0 + L1.
nn::Var down_projection(nn::Tape& tape, const ProjectionWeights& w,
                        const ProjectionUnitSpec& spec, double slope, nn::Var hr);

/// Records the forward pass on a tape. With trainable set, backward()
/// accumulates into model.params() grads; otherwise parameters enter the
/// tape as constants.
nn::Var sr_forward(nn::Tape& tape, SRModel& model, const Image& lr, bool trainable);

/// Inference. Output is factor x input in each spatial dimension and is not
/// clamped. Throws NumericalError on non-finite output.
Image sr_forward(const SRModel& model, const Image& lr);

/// Mean over all pixel-channel entries of the squared difference.
double rec_loss(const Image& x, const Image& x_hat);

/// d rec_loss / d x_hat.
nn::Tensor rec_loss_grad(const Image& x, const nn::Tensor& x_hat);

}  // namespace tdsr::sr

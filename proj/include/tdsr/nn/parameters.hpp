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
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tdsr/nn/tensor.hpp"

namespace tdsr::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Ordered collection of named parameters (a theta).
///
/// Parameters must all be added before any Tape references them; adding
/// may reallocate storage.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value);

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Total number of scalar entries.
  std::size_t num_scalars() const;

  void zero_grad();
  bool all_finite() const;
  bool grads_finite() const;
  double grad_norm() const;
  void scale_grads(double s);

  /// FNV-1a over names, shapes and the raw bytes of every value.
  std::uint64_t hash() const;

  bool operator==(const ParameterStore& other) const;

 private:
  std::vector<Parameter> params_;
};

/// He-style uniform initialisation: U(-b, b) with b = gain * sqrt(3 / fan_in).
void init_uniform(Tensor& t, int fan_in, double gain, std::mt19937_64& rng);

}  // namespace tdsr::nn

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

#include "tdsr/nn/parameters.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace tdsr::nn {

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (find(name) != nullptr) {
    throw std::invalid_argument("ParameterStore: duplicate parameter " + name);
  }
  Tensor grad = Tensor::zeros_like(value);
  params_.push_back({std::move(name), std::move(value), std::move(grad)});
  return params_.back();
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter& ParameterStore::at(std::string_view name) {
  for (Parameter& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("ParameterStore: no parameter " + std::string(name));
}

const Parameter& ParameterStore::at(std::string_view name) const {
  const Parameter* p = find(name);
  if (p == nullptr) {
    throw std::out_of_range("ParameterStore: no parameter " + std::string(name));
  }
  return *p;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) p.grad.fill(0.0);
}

bool ParameterStore::all_finite() const {
  for (const Parameter& p : params_) {
    if (!p.value.all_finite()) return false;
  }
  return true;
}

bool ParameterStore::grads_finite() const {
  for (const Parameter& p : params_) {
    if (!p.grad.all_finite()) return false;
  }
  return true;
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const Parameter& p : params_) {
    for (double g : p.grad.values()) s += g * g;
  }
  return std::sqrt(s);
}

void ParameterStore::scale_grads(double s) {
  for (Parameter& p : params_) p.grad *= s;
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t ParameterStore::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const Parameter& p : params_) {
    fnv_bytes(h, p.name.data(), p.name.size());
    for (int d : p.value.shape()) fnv_bytes(h, &d, sizeof d);
    fnv_bytes(h, p.value.data(), p.value.size() * sizeof(double));
  }
  return h;
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name ||
        !(params_[i].value == other.params_[i].value)) {
      return false;
    }
  }
  return true;
}

void init_uniform(Tensor& t, int fan_in, double gain, std::mt19937_64& rng) {
  const double bound = gain * std::sqrt(3.0 / std::max(fan_in, 1));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
}

}  // namespace tdsr::nn

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

#include "tdsr/nn/tape.hpp"

#include <malloc.h>

#include <stdexcept>

namespace tdsr::nn {

namespace {

// Convolution scratch buffers are a few MB each; without this glibc serves
// them with fresh mmaps and every call pays the page faults again.
[[maybe_unused]] const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return true;
}();

}  // namespace

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, false});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, true});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Parameter& param, bool trainable) {
  nodes_.push_back({param.value, {}, {}, trainable ? &param : nullptr, trainable});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) {
    if (p.defined() && nodes_.at(p.id).requires_grad) needs = true;
  }
  nodes_.push_back({std::move(value), {}, needs ? std::move(backward) : nullptr,
                    nullptr, needs});
  return {static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_accumulator(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

void Tape::backward(Var output, const Tensor& seed) {
  const Seed s{output, seed};
  backward(std::span<const Seed>(&s, 1));
}

void Tape::backward(std::span<const Seed> seeds) {
  for (const Seed& s : seeds) {
    if (!s.var.defined()) continue;
    if (!s.grad.same_shape(value(s.var))) {
      throw std::invalid_argument("Tape::backward: seed shape " +
                                  shape_string(s.grad.shape()) +
                                  " does not match value " +
                                  shape_string(value(s.var).shape()));
    }
    if (!nodes_[s.var.id].requires_grad) continue;
    grad_accumulator(s.var) += s.grad;
  }
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, i);
    } else if (n.param != nullptr) {
      n.param->grad += n.grad;
    }
  }
}

}  // namespace tdsr::nn

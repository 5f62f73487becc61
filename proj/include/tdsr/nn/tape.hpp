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

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "tdsr/nn/parameters.hpp"
#include "tdsr/nn/tensor.hpp"

namespace tdsr::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool defined() const { return id >= 0; }
};

/// Reverse-mode automatic differentiation over Tensor-valued operations.
///
/// Every op appends a node holding its forward value and a closure that
/// pushes the node's gradient to its parents. Nodes only carry gradients
/// when some ancestor is a trainable parameter or a grad-requiring input,
/// so frozen sub-networks cost a data-gradient pass only.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  struct Seed {
    Var var;
    Tensor grad;
  };

  /// A leaf that never receives a gradient.
  Var constant(Tensor value);
  /// A leaf whose gradient is kept and readable after backward().
  Var input(Tensor value);
  /// A parameter leaf. When trainable, backward() adds into param.grad.
  /// The parameter must outlive the tape's backward pass.
  Var parameter(Parameter& param, bool trainable);

  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient of a node after backward(); empty when nothing reached it.
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }

  /// Mutable gradient accumulator for use inside backward closures.
  /// Zero-initialised on first access.
  Tensor& grad_accumulator(Var v);

  void backward(Var output, const Tensor& seed);
  void backward(std::span<const Seed> seeds);

  std::size_t num_nodes() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  // deque keeps value()/grad() references valid while recording.
  std::deque<Node> nodes_;
};

}  // namespace tdsr::nn

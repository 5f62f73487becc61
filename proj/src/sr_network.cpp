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

#include "tdsr/sr_network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "tdsr/degradation.hpp"
#include "tdsr/nn/ops.hpp"

namespace tdsr::sr {

using nn::Tape;
using nn::Tensor;
using nn::Var;

ProjectionUnitSpec projection_spec(int scale_factor) {
  switch (scale_factor) {
    case 2: return {6, 2, 2};
    case 4: return {8, 4, 2};
    case 8: return {12, 8, 2};
    default:
      throw std::invalid_argument("unsupported SR scale factor " +
                                  std::to_string(scale_factor) + " (expected 2, 4 or 8)");
  }
}

void SRConfig::validate() const {
  projection_spec(scale_factor);
  if (num_projection_pairs < 1) throw std::invalid_argument("SRConfig: need >= 1 projection pair");
  if (feature_width < 1) throw std::invalid_argument("SRConfig: feature_width must be >= 1");
  if (channels < 1) throw std::invalid_argument("SRConfig: channels must be >= 1");
}

SRModel::SRModel(SRConfig config, nn::ParameterStore params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

namespace {

std::string up_name(int i) { return "up" + std::to_string(i); }
std::string down_name(int i) { return "down" + std::to_string(i); }

void add_layer(nn::ParameterStore& ps, const std::string& name, std::vector<int> wshape,
               int fan_in, double gain, std::mt19937_64& rng) {
  const int bias_len = name.find("deconv") != std::string::npos ? wshape[1] : wshape[0];
  Tensor w(std::move(wshape));
  nn::init_uniform(w, fan_in, gain, rng);
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", Tensor({bias_len}));
}

void add_unit(nn::ParameterStore& ps, const std::string& prefix, bool up,
              const SRConfig& cfg, std::mt19937_64& rng) {
  const auto spec = projection_spec(cfg.scale_factor);
  const int w = cfg.feature_width;
  const int k = spec.kernel;
  const double gain = std::sqrt(2.0 / (1.0 + cfg.slope * cfg.slope));
  const int conv_fan = w * k * k;
  const int deconv_fan = w * (k / spec.stride) * (k / spec.stride);
  // Transposed conv weights are (Cin, Cout, k, k); conv weights (Cout, Cin, k, k).
  if (up) {
    add_layer(ps, prefix + ".deconv1", {w, w, k, k}, deconv_fan, gain, rng);
    add_layer(ps, prefix + ".conv", {w, w, k, k}, conv_fan, gain, rng);
    add_layer(ps, prefix + ".deconv2", {w, w, k, k}, deconv_fan, gain, rng);
  } else {
    add_layer(ps, prefix + ".conv1", {w, w, k, k}, conv_fan, gain, rng);
    add_layer(ps, prefix + ".deconv", {w, w, k, k}, deconv_fan, gain, rng);
    add_layer(ps, prefix + ".conv2", {w, w, k, k}, conv_fan, gain, rng);
  }
}

struct Binder {
  Tape& tape;
  SRModel& model;
  bool trainable;

  Var operator()(const std::string& name) const {
    nn::Parameter& p = model.params().at(name);
    return trainable ? tape.parameter(p, true) : tape.constant(p.value);
  }

  ProjectionWeights unit(const std::string& prefix, bool up) const {
    const char* l1 = up ? ".deconv1" : ".conv1";
    const char* l2 = up ? ".conv" : ".deconv";
    const char* l3 = up ? ".deconv2" : ".conv2";
    return {(*this)(prefix + l1 + ".w"), (*this)(prefix + l1 + ".b"),
            (*this)(prefix + l2 + ".w"), (*this)(prefix + l2 + ".b"),
            (*this)(prefix + l3 + ".w"), (*this)(prefix + l3 + ".b")};
  }
};

}  // namespace

SRModel build_sr(const SRConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  nn::ParameterStore ps;
  const double gain = std::sqrt(2.0 / (1.0 + cfg.slope * cfg.slope));
  add_layer(ps, "feat", {cfg.feature_width, cfg.channels, 3, 3}, cfg.channels * 9, gain, rng);
  for (int i = 1; i <= cfg.num_projection_pairs; ++i) {
    add_unit(ps, up_name(i), true, cfg, rng);
    if (i < cfg.num_projection_pairs) add_unit(ps, down_name(i), false, cfg, rng);
  }
  const int concat = cfg.feature_width * cfg.num_projection_pairs;
  // Small reconstruction weights so the residual model starts near bicubic.
  add_layer(ps, "recon", {cfg.channels, concat, 3, 3}, concat * 9,
            cfg.bicubic_residual ? 0.1 : 1.0, rng);
  return SRModel(cfg, std::move(ps));
}

SRModel build_sr(int scale_factor, int pairs, int width, std::uint64_t seed) {
  SRConfig cfg;
  cfg.scale_factor = scale_factor;
  cfg.num_projection_pairs = pairs;
  cfg.feature_width = width;
  return build_sr(cfg, seed);
}

Var up_projection(Tape& tape, const ProjectionWeights& w, const ProjectionUnitSpec& spec,
                  double slope, Var lr) {
  const int s = spec.stride;
  const int p = spec.padding;
  Var h0 = nn::leaky_relu(tape, nn::conv_transpose2d(tape, lr, w.w1, w.b1, s, p), slope);
  Var l0 = nn::leaky_relu(tape, nn::conv2d(tape, h0, w.w2, w.b2, s, p), slope);
  if (!tape.value(l0).same_shape(tape.value(lr))) {
    throw std::invalid_argument("up_projection: feature shape mismatch " +
                                nn::shape_string(tape.value(l0).shape()) + " vs " +
                                nn::shape_string(tape.value(lr).shape()));
  }
  Var e = nn::sub(tape, l0, lr);
  Var h1 = nn::leaky_relu(tape, nn::conv_transpose2d(tape, e, w.w3, w.b3, s, p), slope);
  return nn::add(tape, h0, h1);
}

Var down_projection(Tape& tape, const ProjectionWeights& w, const ProjectionUnitSpec& spec,
                    double slope, Var hr) {
  const int s = spec.stride;
  const int p = spec.padding;
  Var l0 = nn::leaky_relu(tape, nn::conv2d(tape, hr, w.w1, w.b1, s, p), slope);
  Var h0 = nn::leaky_relu(tape, nn::conv_transpose2d(tape, l0, w.w2, w.b2, s, p), slope);
  if (!tape.value(h0).same_shape(tape.value(hr))) {
    throw std::invalid_argument("down_projection: feature shape mismatch " +
                                nn::shape_string(tape.value(h0).shape()) + " vs " +
                                nn::shape_string(tape.value(hr).shape()));
  }
  Var e = nn::sub(tape, h0, hr);
  Var l1 = nn::leaky_relu(tape, nn::conv2d(tape, e, w.w3, w.b3, s, p), slope);
  return nn::add(tape, l0, l1);
}

Var sr_forward(Tape& tape, SRModel& model, const Image& lr, bool trainable) {
  const SRConfig& cfg = model.config();
  if (lr.channels() != cfg.channels) {
    throw std::invalid_argument("sr_forward: expected " + std::to_string(cfg.channels) +
                                " channels, got " + std::to_string(lr.channels()));
  }
  const Binder bind{tape, model, trainable};
  const auto spec = model.projection();

  Var x = tape.constant(nn::to_tensor(lr));
  Var feat = nn::leaky_relu(tape, nn::conv2d(tape, x, bind("feat.w"), bind("feat.b"), 1, 1),
                            cfg.slope);
  std::vector<Var> hr_features;
  Var current = feat;
  for (int i = 1; i <= cfg.num_projection_pairs; ++i) {
    Var h = up_projection(tape, bind.unit(up_name(i), true), spec, cfg.slope, current);
    hr_features.push_back(h);
    if (i < cfg.num_projection_pairs) {
      current = down_projection(tape, bind.unit(down_name(i), false), spec, cfg.slope, h);
    }
  }
  Var cat = hr_features.size() == 1 ? hr_features[0] : nn::concat_channels(tape, hr_features);
  Var out = nn::conv2d(tape, cat, bind("recon.w"), bind("recon.b"), 1, 1);
  if (cfg.bicubic_residual) {
    Var base = tape.constant(nn::to_tensor(degradation::upscale_bicubic(lr, cfg.scale_factor)));
    out = nn::add(tape, out, base);
  }
  return out;
}

Image sr_forward(const SRModel& model, const Image& lr) {
  Tape tape;
  // Non-trainable binding only reads parameters.
  Var out = sr_forward(tape, const_cast<SRModel&>(model), lr, false);
  const Tensor& v = tape.value(out);
  if (!v.all_finite()) throw NumericalError("sr_forward: non-finite output");
  return nn::to_image(v);
}

double rec_loss(const Image& x, const Image& x_hat) {
  if (!x.same_shape(x_hat)) {
    throw std::invalid_argument("rec_loss: shape mismatch");
  }
  double s = 0.0;
  const auto a = x.data();
  const auto b = x_hat.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

Tensor rec_loss_grad(const Image& x, const Tensor& x_hat) {
  if (x_hat.ndim() != 3 || x_hat.dim(0) != x.channels() || x_hat.dim(1) != x.height() ||
      x_hat.dim(2) != x.width()) {
    throw std::invalid_argument("rec_loss_grad: shape mismatch");
  }
  Tensor g = Tensor::zeros_like(x_hat);
  const double scale = 2.0 / static_cast<double>(g.size());
  const auto a = x.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (x_hat[i] - a[i]);
  return g;
}

}  // namespace tdsr::sr

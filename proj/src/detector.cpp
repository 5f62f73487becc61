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

#include "tdsr/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "tdsr/nn/ops.hpp"

namespace tdsr::det {

using nn::Tape;
using nn::Tensor;
using nn::Var;

AnchorSet generate_anchors(const std::vector<FeatureMapSpec>& specs, int image_size) {
  if (image_size <= 0) throw std::invalid_argument("generate_anchors: image_size must be > 0");
  AnchorSet set;
  const double size = image_size;
  for (std::size_t m = 0; m < specs.size(); ++m) {
    const FeatureMapSpec& spec = specs[m];
    if (spec.grid < 1) throw std::invalid_argument("generate_anchors: grid must be >= 1");
    const double cell = size / spec.grid;
    for (int y = 0; y < spec.grid; ++y) {
      for (int x = 0; x < spec.grid; ++x) {
        const double cx = (x + 0.5) * cell;
        const double cy = (y + 0.5) * cell;
        for (std::size_t s = 0; s < spec.scales.size(); ++s) {
          for (std::size_t r = 0; r < spec.ratios.size(); ++r) {
            const double root = std::sqrt(spec.ratios[r]);
            const double w = spec.scales[s] * size * root;
            const double h = spec.scales[s] * size / root;
            Box b = Box::from_center(cx, cy, w, h);
            b.xmin = std::clamp(b.xmin, 0.0, size);
            b.ymin = std::clamp(b.ymin, 0.0, size);
            b.xmax = std::clamp(b.xmax, 0.0, size);
            b.ymax = std::clamp(b.ymax, 0.0, size);
            set.anchors.push_back(b);
            set.provenance.push_back({static_cast<int>(m), y, x, static_cast<int>(s),
                                      static_cast<int>(r)});
          }
        }
      }
    }
  }
  return set;
}

int DetectorConfig::num_blocks() const {
  if (maps.empty() || maps.back().grid < 1) return 0;
  int blocks = 0;
  int size = input_size;
  while (size > maps.back().grid && size % 2 == 0) {
    size /= 2;
    ++blocks;
  }
  return size == maps.back().grid ? blocks : 0;
}

void DetectorConfig::validate() const {
  if (num_classes < 1) throw std::invalid_argument("DetectorConfig: num_classes must be >= 1");
  if (maps.empty()) throw std::invalid_argument("DetectorConfig: need >= 1 feature map");
  if (base_width < 1 || channels < 1) throw std::invalid_argument("DetectorConfig: bad widths");
  const int blocks = num_blocks();
  if (blocks < static_cast<int>(maps.size())) {
    throw std::invalid_argument("DetectorConfig: input " + std::to_string(input_size) +
                                " cannot be halved down to the requested grids");
  }
  // Map i is read after block (blocks - maps + 1 + i).
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const int block = blocks - static_cast<int>(maps.size()) + 1 + static_cast<int>(i);
    if (maps[i].grid != input_size >> block) {
      throw std::invalid_argument("DetectorConfig: map " + std::to_string(i) + " grid " +
                                  std::to_string(maps[i].grid) + " should be " +
                                  std::to_string(input_size >> block));
    }
    if (maps[i].scales.empty() || maps[i].ratios.empty()) {
      throw std::invalid_argument("DetectorConfig: map without scales or ratios");
    }
  }
}

DetectorConfig default_detector_config(int num_classes, int input_size) {
  DetectorConfig cfg;
  cfg.num_classes = num_classes;
  cfg.input_size = input_size;
  cfg.maps = {FeatureMapSpec{input_size / 8, {0.14, 0.2}, {1.0}},
              FeatureMapSpec{input_size / 16, {0.28, 0.4}, {1.0}}};
  return cfg;
}

DetectorModel::DetectorModel(DetectorConfig config, nn::ParameterStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  anchors_ = generate_anchors(config_.maps, config_.input_size);
}

namespace {

int block_width(const DetectorConfig& cfg, int block) {
  return cfg.base_width * std::min(1 << (block - 1), 4);
}

std::string block_name(int b) { return "block" + std::to_string(b); }
std::string head_name(std::size_t m) { return "head" + std::to_string(m); }

void add_conv(nn::ParameterStore& ps, const std::string& name, int cout, int cin, int k,
              double gain, std::mt19937_64& rng) {
  Tensor w({cout, cin, k, k});
  nn::init_uniform(w, cin * k * k, gain, rng);
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", Tensor({cout}));
}

}  // namespace

DetectorModel build_detector(const DetectorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  nn::ParameterStore ps;
  const double gain = std::sqrt(2.0 / (1.0 + cfg.slope * cfg.slope));
  int cin = cfg.channels;
  for (int b = 1; b <= cfg.num_blocks(); ++b) {
    const int w = block_width(cfg, b);
    add_conv(ps, block_name(b) + ".conv1", w, cin, 3, gain, rng);
    add_conv(ps, block_name(b) + ".conv2", w, w, 3, gain, rng);
    cin = w;
  }
  const int first_map_block = cfg.num_blocks() - static_cast<int>(cfg.maps.size()) + 1;
  for (std::size_t m = 0; m < cfg.maps.size(); ++m) {
    const int w = block_width(cfg, first_map_block + static_cast<int>(m));
    const int out = cfg.maps[m].anchors_per_cell() * (cfg.num_labels() + 4);
    add_conv(ps, head_name(m), out, w, 3, 1.0, rng);
  }
  return DetectorModel(cfg, std::move(ps));
}

DetectorModel build_detector(int num_classes, const std::vector<FeatureMapSpec>& maps,
                             std::uint64_t seed, int input_size) {
  DetectorConfig cfg;
  cfg.num_classes = num_classes;
  cfg.maps = maps;
  cfg.input_size = input_size;
  return build_detector(cfg, seed);
}

namespace {

// Scatter per-map head tensors into (A, C+1) logits and (A, 4) offsets.
std::pair<Var, Var> gather_heads(Tape& tape, const DetectorConfig& cfg,
                                 const std::vector<Var>& maps) {
  const int labels = cfg.num_labels();
  const int stride = labels + 4;
  std::size_t total = 0;
  for (const auto& m : cfg.maps) {
    total += static_cast<std::size_t>(m.grid) * m.grid * m.anchors_per_cell();
  }
  Tensor logits({static_cast<int>(total), labels});
  Tensor offsets({static_cast<int>(total), 4});

  std::vector<std::pair<int, int>> layout;  // (grid, anchors per cell)
  for (const auto& m : cfg.maps) layout.emplace_back(m.grid, m.anchors_per_cell());

  auto for_each_entry = [layout, stride, labels](auto&& fn) {
    std::size_t idx = 0;
    for (std::size_t m = 0; m < layout.size(); ++m) {
      const auto [g, apc] = layout[m];
      for (int y = 0; y < g; ++y) {
        for (int x = 0; x < g; ++x) {
          for (int a = 0; a < apc; ++a, ++idx) {
            for (int k = 0; k < stride; ++k) {
              const std::size_t src = (static_cast<std::size_t>(a * stride + k) * g + y) * g + x;
              fn(m, src, idx, k, k < labels);
            }
          }
        }
      }
    }
  };

  for_each_entry([&](std::size_t m, std::size_t src, std::size_t idx, int k, bool is_logit) {
    const double v = tape.value(maps[m])[src];
    if (is_logit) {
      logits[idx * labels + k] = v;
    } else {
      offsets[idx * 4 + (k - labels)] = v;
    }
  });

  // Shared backward: both outputs scatter into the same map gradients.
  auto backward_for = [maps, for_each_entry, labels](bool want_logits) {
    return [maps, for_each_entry, labels, want_logits](Tape& t, int self) {
      const Tensor& g = t.grad(Var{self});
      for_each_entry([&](std::size_t m, std::size_t src, std::size_t idx, int k, bool is_logit) {
        if (is_logit != want_logits || !t.requires_grad(maps[m])) return;
        const double v = is_logit ? g[idx * labels + k] : g[idx * 4 + (k - labels)];
        t.grad_accumulator(maps[m])[src] += v;
      });
    };
  };
  Var lv = tape.record(std::move(logits), maps, backward_for(true));
  Var ov = tape.record(std::move(offsets), maps, backward_for(false));
  return {lv, ov};
}

}  // namespace

DetectorHeads detector_forward(Tape& tape, DetectorModel& model, Var image, bool trainable) {
  const DetectorConfig& cfg = model.config();
  const Tensor& img = tape.value(image);
  if (img.ndim() != 3 || img.dim(0) != cfg.channels || img.dim(1) != cfg.input_size ||
      img.dim(2) != cfg.input_size) {
    throw std::invalid_argument("detector: expected input (" + std::to_string(cfg.channels) +
                                "," + std::to_string(cfg.input_size) + "," +
                                std::to_string(cfg.input_size) + "), got " +
                                nn::shape_string(img.shape()));
  }
  const bool train = trainable && !model.frozen();
  auto bind = [&](const std::string& name) {
    nn::Parameter& p = model.params().at(name);
    return train ? tape.parameter(p, true) : tape.constant(p.value);
  };

  const int blocks = cfg.num_blocks();
  const int first_map_block = blocks - static_cast<int>(cfg.maps.size()) + 1;
  DetectorHeads heads;
  Var x = image;
  for (int b = 1; b <= blocks; ++b) {
    const std::string n = block_name(b);
    x = nn::leaky_relu(tape, nn::conv2d(tape, x, bind(n + ".conv1.w"), bind(n + ".conv1.b"), 2, 1),
                       cfg.slope);
    x = nn::leaky_relu(tape, nn::conv2d(tape, x, bind(n + ".conv2.w"), bind(n + ".conv2.b"), 1, 1),
                       cfg.slope);
    if (b >= first_map_block) {
      const std::size_t m = static_cast<std::size_t>(b - first_map_block);
      heads.maps.push_back(nn::conv2d(tape, x, bind(head_name(m) + ".w"),
                                      bind(head_name(m) + ".b"), 1, 1));
    }
  }
  std::tie(heads.class_logits, heads.offsets) = gather_heads(tape, cfg, heads.maps);
  return heads;
}

MatchResult match_anchors(const AnchorSet& anchors, const GroundTruth& gt,
                          double iou_threshold, Variances variances) {
  MatchResult result;
  const std::size_t num_anchors = anchors.size();
  const std::size_t num_gt = gt.size();
  std::vector<int> gt_of_anchor(num_anchors, -1);

  if (num_gt > 0) {
    if (gt.labels.size() != num_gt) {
      throw std::invalid_argument("match_anchors: boxes/labels length mismatch");
    }
    std::vector<double> overlap(num_gt * num_anchors);
    for (std::size_t g = 0; g < num_gt; ++g) {
      for (std::size_t a = 0; a < num_anchors; ++a) {
        overlap[g * num_anchors + a] = iou(gt.boxes[g], anchors.anchors[a]);
      }
    }
    // Bipartite: repeatedly take the global maximum over free pairs.
    std::vector<bool> gt_done(num_gt, false);
    for (std::size_t round = 0; round < std::min(num_gt, num_anchors); ++round) {
      double best = -1.0;
      std::size_t bg = 0, ba = 0;
      for (std::size_t g = 0; g < num_gt; ++g) {
        if (gt_done[g]) continue;
        for (std::size_t a = 0; a < num_anchors; ++a) {
          if (gt_of_anchor[a] >= 0) continue;
          if (overlap[g * num_anchors + a] > best) {
            best = overlap[g * num_anchors + a];
            bg = g;
            ba = a;
          }
        }
      }
      gt_done[bg] = true;
      gt_of_anchor[ba] = static_cast<int>(bg);
    }
    // Threshold: remaining anchors take their best gt when it overlaps enough.
    for (std::size_t a = 0; a < num_anchors; ++a) {
      if (gt_of_anchor[a] >= 0) continue;
      double best = -1.0;
      std::size_t bg = 0;
      for (std::size_t g = 0; g < num_gt; ++g) {
        if (overlap[g * num_anchors + a] > best) {
          best = overlap[g * num_anchors + a];
          bg = g;
        }
      }
      if (best > iou_threshold) gt_of_anchor[a] = static_cast<int>(bg);
    }
  }

  for (std::size_t a = 0; a < num_anchors; ++a) {
    const int g = gt_of_anchor[a];
    if (g < 0) {
      result.negatives.push_back(static_cast<int>(a));
    } else {
      result.matched.push_back({static_cast<int>(a), g, gt.labels[g],
                                encode_box(gt.boxes[g], anchors.anchors[a], variances)});
    }
  }
  return result;
}

namespace {

// log-sum-exp of one logit row and the softmax written into probs.
double softmax_row(const double* logits, int n, double* probs) {
  double mx = logits[0];
  for (int k = 1; k < n; ++k) mx = std::max(mx, logits[k]);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    probs[k] = std::exp(logits[k] - mx);
    sum += probs[k];
  }
  for (int k = 0; k < n; ++k) probs[k] /= sum;
  return mx + std::log(sum);
}

void check_logits(const Tensor& logits) {
  if (logits.ndim() != 2 || logits.dim(1) < 2) {
    throw std::invalid_argument("class logits must be (A, C+1) with C >= 1");
  }
}

}  // namespace

ConfidenceLoss confidence_loss(const Tensor& logits, const MatchResult& match,
                               double hard_negative_ratio) {
  check_logits(logits);
  const int labels = logits.dim(1);
  const int num_anchors = logits.dim(0);
  ConfidenceLoss out;
  out.grad = Tensor::zeros_like(logits);
  if (match.num_matched() == 0) return out;

  std::vector<double> probs(labels);
  auto add_term = [&](int anchor, int label) {
    if (anchor < 0 || anchor >= num_anchors) {
      throw std::invalid_argument("confidence_loss: anchor index out of range");
    }
    const double* row = logits.data() + static_cast<std::size_t>(anchor) * labels;
    const double lse = softmax_row(row, labels, probs.data());
    double* g = out.grad.data() + static_cast<std::size_t>(anchor) * labels;
    for (int k = 0; k < labels; ++k) g[k] += probs[k];
    g[label] -= 1.0;
    return lse - row[label];
  };

  for (const Match& m : match.matched) out.value += add_term(m.anchor, m.label);

  // Background loss of every negative, mined highest first.
  std::vector<std::pair<double, int>> neg_loss;
  neg_loss.reserve(match.negatives.size());
  for (int a : match.negatives) {
    const double* row = logits.data() + static_cast<std::size_t>(a) * labels;
    const double lse = softmax_row(row, labels, probs.data());
    neg_loss.emplace_back(lse - row[kBackground], a);
  }
  std::stable_sort(neg_loss.begin(), neg_loss.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  const auto limit = static_cast<std::size_t>(
      std::floor(hard_negative_ratio * match.num_matched()));
  const std::size_t take = std::min(limit, neg_loss.size());
  for (std::size_t i = 0; i < take; ++i) {
    out.value += add_term(neg_loss[i].second, kBackground);
    out.mined_negatives.push_back(neg_loss[i].second);
  }
  return out;
}

double smooth_l1(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

LossWithGrad localization_loss(const Tensor& offsets, const MatchResult& match) {
  if (offsets.ndim() != 2 || offsets.dim(1) != 4) {
    throw std::invalid_argument("localization_loss: offsets must be (A, 4)");
  }
  LossWithGrad out;
  out.grad = Tensor::zeros_like(offsets);
  for (const Match& m : match.matched) {
    if (m.anchor < 0 || m.anchor >= offsets.dim(0)) {
      throw std::invalid_argument("localization_loss: anchor index out of range");
    }
    const double target[4] = {m.target.cx, m.target.cy, m.target.w, m.target.h};
    for (int k = 0; k < 4; ++k) {
      const std::size_t i = static_cast<std::size_t>(m.anchor) * 4 + k;
      const double d = offsets[i] - target[k];
      out.value += smooth_l1(d);
      out.grad[i] += std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
    }
  }
  return out;
}

DetectionLoss detection_loss(const Tensor& class_logits, const Tensor& offsets,
                             const AnchorSet& anchors, const GroundTruth& gt,
                             const LossConfig& config, Variances variances) {
  check_logits(class_logits);
  if (static_cast<std::size_t>(class_logits.dim(0)) != anchors.size() ||
      static_cast<std::size_t>(offsets.dim(0)) != anchors.size()) {
    throw std::invalid_argument("detection_loss: predictions do not cover the anchor set");
  }
  const MatchResult match = match_anchors(anchors, gt, config.match_iou, variances);
  DetectionLoss out;
  out.num_matched = match.num_matched();
  if (out.num_matched == 0) {
    out.skipped = true;
    out.grad_logits = Tensor::zeros_like(class_logits);
    out.grad_offsets = Tensor::zeros_like(offsets);
    return out;
  }
  ConfidenceLoss conf = confidence_loss(class_logits, match, config.hard_negative_ratio);
  LossWithGrad loc = localization_loss(offsets, match);
  const double inv_b = 1.0 / out.num_matched;
  out.confidence = conf.value;
  out.localization = loc.value;
  out.task = inv_b * (conf.value + config.lambda * loc.value);
  out.grad_logits = std::move(conf.grad);
  out.grad_logits *= inv_b;
  out.grad_offsets = std::move(loc.grad);
  out.grad_offsets *= inv_b * config.lambda;
  return out;
}

DetectionSet decode_detections(const AnchorSet& anchors, const Tensor& class_logits,
                               const Tensor& offsets, int image_size,
                               const DetectParams& params, Variances variances) {
  check_logits(class_logits);
  const int labels = class_logits.dim(1);
  const std::size_t n = anchors.size();
  if (static_cast<std::size_t>(class_logits.dim(0)) != n ||
      static_cast<std::size_t>(offsets.dim(0)) != n) {
    throw std::invalid_argument("decode_detections: predictions do not cover the anchor set");
  }
  constexpr std::size_t kPreNmsPerClass = 400;
  const double size = image_size;
  std::vector<DetectionSet> per_class(labels);
  std::vector<double> probs(labels);
  for (std::size_t a = 0; a < n; ++a) {
    softmax_row(class_logits.data() + a * labels, labels, probs.data());
    Box decoded;
    bool have_box = false;
    for (int c = 1; c < labels; ++c) {
      if (!(probs[c] > params.score_threshold)) continue;
      if (!have_box) {
        const BoxOffsets o{offsets[a * 4], offsets[a * 4 + 1], offsets[a * 4 + 2],
                           offsets[a * 4 + 3]};
        try {
          decoded = decode_box(o, anchors.anchors[a], variances);
        } catch (const NumericalError&) {
          break;
        }
        decoded.xmin = std::clamp(decoded.xmin, 0.0, size);
        decoded.ymin = std::clamp(decoded.ymin, 0.0, size);
        decoded.xmax = std::clamp(decoded.xmax, 0.0, size);
        decoded.ymax = std::clamp(decoded.ymax, 0.0, size);
        if (!decoded.valid()) break;
        have_box = true;
      }
      per_class[c].push_back({decoded, c, probs[c]});
    }
  }
  DetectionSet all;
  for (int c = 1; c < labels; ++c) {
    DetectionSet& cand = per_class[c];
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Detection& x, const Detection& y) { return x.score > y.score; });
    if (cand.size() > kPreNmsPerClass) cand.resize(kPreNmsPerClass);
    DetectionSet kept = nms(cand, params.nms_iou, true);
    all.insert(all.end(), kept.begin(), kept.end());
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Detection& x, const Detection& y) { return x.score > y.score; });
  if (params.top_k > 0 && all.size() > static_cast<std::size_t>(params.top_k)) {
    all.resize(params.top_k);
  }
  return all;
}

DetectorOutput detector_outputs(const DetectorModel& model, const Image& img) {
  Tape tape;
  Var x = tape.constant(nn::to_tensor(img));
  // Non-trainable binding only reads parameters.
  DetectorHeads heads = detector_forward(tape, const_cast<DetectorModel&>(model), x, false);
  return {tape.value(heads.class_logits), tape.value(heads.offsets)};
}

DetectionSet detect(const DetectorModel& model, const Image& img, const DetectParams& params) {
  if (img.height() != model.input_size() || img.width() != model.input_size()) {
    throw std::invalid_argument("detect: image is " + std::to_string(img.height()) + "x" +
                                std::to_string(img.width()) + ", detector expects " +
                                std::to_string(model.input_size()));
  }
  const DetectorOutput out = detector_outputs(model, img);
  return decode_detections(model.anchors(), out.class_logits, out.offsets, model.input_size(),
                           params, model.config().variances);
}

}  // namespace tdsr::det

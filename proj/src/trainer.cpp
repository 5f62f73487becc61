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

#include "tdsr/trainer.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tdsr/core/rng.hpp"
#include "tdsr/nn/tape.hpp"

namespace tdsr::train {

void Adam::step(nn::ParameterStore& params, double lr) {
  auto& ps = params.params();
  if (m_.empty()) {
    for (const auto& p : ps) {
      m_.push_back(nn::Tensor::zeros_like(p.value));
      v_.push_back(nn::Tensor::zeros_like(p.value));
    }
  }
  if (m_.size() != ps.size()) throw std::logic_error("Adam: parameter layout changed");
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    nn::Tensor& value = ps[i].value;
    const nn::Tensor& grad = ps[i].grad;
    nn::Tensor& m = m_[i];
    nn::Tensor& v = v_[i];
    if (!m.same_shape(value)) throw std::logic_error("Adam: parameter layout changed");
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      value[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config_.eps);
    }
  }
}

nn::ParameterStore Adam::export_moments(const nn::ParameterStore& params, bool second) const {
  nn::ParameterStore out;
  const auto& src = second ? v_ : m_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params.params()[i];
    out.add(p.name, i < src.size() ? src[i] : nn::Tensor::zeros_like(p.value));
  }
  return out;
}

void Adam::import_state(std::int64_t steps, const nn::ParameterStore& m,
                        const nn::ParameterStore& v) {
  if (m.size() != v.size()) throw std::runtime_error("Adam: moment sections differ in size");
  step_ = steps;
  m_.clear();
  v_.clear();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m_.push_back(m.params()[i].value);
    v_.push_back(v.params()[i].value);
  }
}

double learning_rate(double base, std::int64_t decay_every, double factor,
                     std::int64_t iteration) {
  if (decay_every <= 0) return base;
  return base * std::pow(factor, static_cast<double>(iteration / decay_every));
}

double clip_grad_norm(nn::ParameterStore& params, double max_norm) {
  const double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) params.scale_grads(max_norm / norm);
  return norm;
}

Sample hflip(const Sample& s) {
  Sample out = s;
  const int w = s.image.width();
  for (int c = 0; c < s.image.channels(); ++c) {
    for (int y = 0; y < s.image.height(); ++y) {
      for (int x = 0; x < w; ++x) out.image.at(c, y, x) = s.image.at(c, y, w - 1 - x);
    }
  }
  for (Box& b : out.gt.boxes) {
    const double xmin = w - b.xmax;
    b.xmax = w - b.xmin;
    b.xmin = xmin;
  }
  return out;
}

void TrainConfig::validate() const {
  if (schedule.segments.empty()) throw std::invalid_argument("TrainConfig: empty schedule");
  if (!(base_lr > 0.0)) throw std::invalid_argument("TrainConfig: base_lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (eval_every < 0 || lr_decay_every < 0) {
    throw std::invalid_argument("TrainConfig: negative interval");
  }
  if (crop_size < 0) throw std::invalid_argument("TrainConfig: crop_size must be >= 0");
  degradation.validate();
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t TrainConfig::fingerprint() const {
  std::ostringstream s;
  s << fmt(base_lr) << '|' << lr_decay_every << '|'
    << fmt(lr_decay_factor) << '|' << batch_size << '|' << fmt(adam.beta1) << '|'
    << fmt(adam.beta2) << '|' << fmt(adam.eps) << '|' << fmt(clip_norm) << '|' << eval_every
    << '|' << seed << '|' << degradation.scale_factor << '|' << fmt(degradation.blur_sigma)
    << '|' << fmt(degradation.noise_sigma) << '|' << degradation.seed << '|' << fmt(lambda)
    << '|' << hflip << '|' << crop_size;
  return fnv1a(s.str());
}

std::string format_record(const MetricsRecord& r) {
  return std::to_string(r.iteration) + "," + fmt(r.alpha) + "," + fmt(r.beta) + "," +
         fmt(r.loss_rec) + "," + fmt(r.loss_task) + "," + fmt(r.psnr) + "," + fmt(r.map);
}

MetricsRecord parse_record(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (fields.size() != 7) {
    throw std::runtime_error("metrics record needs 7 fields: '" + line + "'");
  }
  auto num = [&](const std::string& s) {
    if (s == "nan") return std::nan("");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw std::runtime_error("bad number '" + s + "' in metrics record");
    }
    return v;
  };
  MetricsRecord r;
  auto [ptr, ec] =
      std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), r.iteration);
  if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
    throw std::runtime_error("bad iteration '" + fields[0] + "' in metrics record");
  }
  r.alpha = num(fields[1]);
  r.beta = num(fields[2]);
  r.loss_rec = num(fields[3]);
  r.loss_task = num(fields[4]);
  r.psnr = num(fields[5]);
  r.map = num(fields[6]);
  return r;
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error(path.string() + ": missing metrics header");
  }
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_record(line));
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  out << kMetricsHeader << '\n';
  for (const auto& r : records) out << format_record(r) << '\n';
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void log_metrics(const std::filesystem::path& path, const MetricsRecord& record) {
  std::ofstream out(path, std::ios::app);
  out << format_record(record) << '\n';
  out.close();
  if (!out) throw std::runtime_error("cannot append to " + path.string());
}

MetricsRecord evaluate_record(const sr::SRModel& sr, const det::DetectorModel* det,
                              std::span<const Sample> samples, const TrainConfig& config,
                              const metrics::EvalOptions& options, std::int64_t iteration,
                              const objective::LossWeights& weights) {
  const double nan = std::nan("");
  MetricsRecord r{iteration, weights.alpha, weights.beta, nan, nan, nan, nan};
  if (samples.empty()) return r;
  double rec = 0.0, task = 0.0, psnr = 0.0;
  int task_count = 0;
  std::vector<DetectionSet> dets;
  std::vector<GroundTruth> gts;
  det::LossConfig loss_cfg;
  loss_cfg.lambda = config.lambda;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto pair = degradation::make_pair(samples[i].image, samples[i].gt,
                                             metrics::sample_spec(config.degradation, i));
    const Image out = sr::sr_forward(sr, pair.lr);
    rec += sr::rec_loss(pair.target_hr, out);
    psnr += metrics::psnr(pair.target_hr, out);
    if (det != nullptr) {
      const det::DetectorOutput o = det::detector_outputs(*det, out);
      const det::DetectionLoss dl = det::detection_loss(o.class_logits, o.offsets, det->anchors(),
                                                        pair.gt, loss_cfg, det->config().variances);
      if (!dl.skipped) {
        task += dl.task;
        ++task_count;
      }
      dets.push_back(det::detect(*det, out.clamped(), options.detect));
      gts.push_back(pair.gt);
    }
  }
  const double n = static_cast<double>(samples.size());
  r.loss_rec = rec / n;
  r.psnr = psnr / n;
  if (det != nullptr) {
    r.loss_task = task_count > 0 ? task / task_count : 0.0;
    bool any_gt = false;
    for (const auto& g : gts) any_gt = any_gt || !g.empty();
    if (any_gt) r.map = metrics::mean_ap(dets, gts, det->num_classes(), options.ap).map;
  }
  return r;
}

Checkpoint make_checkpoint(const sr::SRModel& sr, const det::DetectorModel* det,
                           const Adam& adam, const TrainConfig& config, std::int64_t iteration) {
  Checkpoint c;
  c.iteration = iteration;
  c.config_fingerprint = config.fingerprint();
  c.rng_state = "counter:" + std::to_string(config.seed) + ":" + std::to_string(iteration);
  nlohmann::json meta{{"sr", nlohmann::json::parse(sr_config_json(sr.config()))},
                      {"schedule", config.schedule.to_string()}};
  if (det != nullptr) meta["det"] = nlohmann::json::parse(detector_config_json(det->config()));
  c.meta = meta.dump();
  c.adam_step = adam.steps();
  c.add("sr", sr.params());
  if (det != nullptr) c.add("det", det->params());
  c.add("adam.m", adam.export_moments(sr.params(), false));
  c.add("adam.v", adam.export_moments(sr.params(), true));
  return c;
}

namespace {

// Slot keys for the counter-based per-iteration randomness.
enum Stream : std::uint64_t { kPick = 0, kFlip = 1, kNoise = 2, kCrop = 3 };

Sample training_sample(std::span<const Sample> data, std::uint64_t seed, std::int64_t it,
                       int slot, bool flip_enabled, int crop_size) {
  const auto u = static_cast<std::uint64_t>(it);
  const auto b = static_cast<std::uint64_t>(slot);
  const std::size_t idx = derive_seed(seed, {u, b, kPick}) % data.size();
  Sample s = data[idx];
  if (flip_enabled && (derive_seed(seed, {u, b, kFlip}) & 1U)) s = hflip(s);
  if (crop_size > 0 && (crop_size < s.image.width() || crop_size < s.image.height())) {
    const int size = std::min({crop_size, s.image.width(), s.image.height()});
    const std::uint64_t r = derive_seed(seed, {u, b, kCrop});
    degradation::CropWindow win;
    win.width = win.height = size;
    win.x0 = static_cast<int>(r % static_cast<std::uint64_t>(s.image.width() - size + 1));
    win.y0 = static_cast<int>((r >> 32) % static_cast<std::uint64_t>(s.image.height() - size + 1));
    s.image = degradation::crop(s.image, win);
    s.gt = degradation::shift_and_clip(s.gt, win, 4.0);
  }
  return s;
}

double rec_only_gradient(sr::SRModel& sr, const degradation::DegradedPair& pair, double alpha) {
  nn::Tape tape;
  const nn::Var out = sr::sr_forward(tape, sr, pair.lr, true);
  const nn::Tensor& x_hat = tape.value(out);
  nn::Tensor g = sr::rec_loss_grad(pair.target_hr, x_hat);
  g *= alpha;
  tape.backward(out, g);
  if (!sr.params().grads_finite()) throw NumericalError("reconstruction gradient is not finite");
  return alpha * sr::rec_loss(pair.target_hr, nn::to_image(x_hat));
}

bool shares_prefix(const objective::Schedule& a, const objective::Schedule& b,
                   std::int64_t n) {
  if (n > a.total() || n > b.total()) return false;
  // Compare on the union of segment boundaries below n.
  std::vector<std::int64_t> cuts = a.boundaries();
  const auto more = b.boundaries();
  cuts.insert(cuts.end(), more.begin(), more.end());
  for (std::int64_t cut : cuts) {
    if (cut < n && !(objective::weights_at(a, cut) == objective::weights_at(b, cut))) {
      return false;
    }
  }
  return true;
}

void prepare_metrics_log(const std::filesystem::path& path, std::int64_t start) {
  if (path.empty()) return;
  std::vector<MetricsRecord> kept;
  if (start > 0 && std::filesystem::exists(path)) {
    for (const auto& r : read_metrics_csv(path)) {
      if (r.iteration <= start) kept.push_back(r);
    }
  }
  write_metrics_csv(path, kept);
}

}  // namespace

TrainResult train_sr(sr::SRModel& sr, const det::DetectorModel* det,
                     std::span<const Sample> train, const TrainConfig& config,
                     const RunOptions& options) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("train_sr: empty training set");
  if (det != nullptr && !det->frozen()) {
    throw std::logic_error("train_sr: the detector must be frozen");
  }
  if (det == nullptr) {
    for (const auto& s : config.schedule.segments) {
      if (s.iterations > 0 && s.weights.beta != 0.0) {
        throw std::invalid_argument("train_sr: a task-loss schedule needs a detector");
      }
    }
  }

  Adam adam(config.adam);
  std::int64_t start = 0;
  if (options.resume != nullptr) {
    const Checkpoint& c = *options.resume;
    if (c.config_fingerprint != config.fingerprint()) {
      throw std::runtime_error("resume: checkpoint was written with a different configuration");
    }
    const auto meta = nlohmann::json::parse(c.meta.empty() ? "{}" : c.meta);
    if (!meta.contains("schedule")) throw std::runtime_error("resume: checkpoint has no schedule");
    const auto previous = objective::parse_schedule(meta.at("schedule").get<std::string>());
    if (!shares_prefix(previous, config.schedule, c.iteration)) {
      throw std::runtime_error("resume: schedule " + config.schedule.to_string() +
                               " does not continue " + previous.to_string() + " past iteration " +
                               std::to_string(c.iteration));
    }
    const auto* sr_params = c.find("sr");
    const auto* m = c.find("adam.m");
    const auto* v = c.find("adam.v");
    if (sr_params == nullptr || m == nullptr || v == nullptr) {
      throw std::runtime_error("resume: checkpoint lacks SR or optimizer state");
    }
    restore_parameters(sr.params(), *sr_params);
    adam.import_state(c.adam_step, *m, *v);
    start = c.iteration;
  }
  prepare_metrics_log(options.metrics_csv, start);

  const std::int64_t total = config.schedule.total();
  const std::int64_t end =
      options.stop_after >= 0 ? std::min(total, options.stop_after) : total;
  auto save = [&](std::int64_t iteration) {
    if (!options.checkpoint.empty()) {
      save_checkpoint(options.checkpoint, make_checkpoint(sr, det, adam, config, iteration));
    }
  };

  TrainResult result;
  result.iterations = start;
  for (std::int64_t it = start; it < end; ++it) {
    objective::LossWeights w = objective::weights_at(config.schedule, it);
    w.lambda = config.lambda;
    const double lr =
        learning_rate(config.base_lr, config.lr_decay_every, config.lr_decay_factor, it);
    sr.params().zero_grad();
    double loss = 0.0;
    try {
      for (int b = 0; b < config.batch_size; ++b) {
        const Sample s = training_sample(train, config.seed, it, b, config.hflip, config.crop_size);
        degradation::DegradationSpec spec = config.degradation;
        spec.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(it),
                                              static_cast<std::uint64_t>(b), kNoise});
        const auto pair = degradation::make_pair(s.image, s.gt, spec);
        if (det != nullptr) {
          loss += objective::compound_gradient(pair.target_hr, pair.gt, pair.lr, sr, *det, w).total;
        } else {
          loss += rec_only_gradient(sr, pair, w.alpha);
        }
      }
      loss /= config.batch_size;
      if (!std::isfinite(loss)) {
        throw NumericalError("loss is not finite at iteration " + std::to_string(it));
      }
    } catch (const NumericalError&) {
      sr.params().zero_grad();
      save(it);
      throw;
    }
    sr.params().scale_grads(1.0 / config.batch_size);
    clip_grad_norm(sr.params(), config.clip_norm);
    adam.step(sr.params(), lr);
    result.losses.push_back(loss);

    const std::int64_t done = it + 1;
    result.iterations = done;
    if (config.eval_every > 0 && done % config.eval_every == 0) {
      MetricsRecord r =
          evaluate_record(sr, det, options.eval_samples, config, options.eval, done, w);
      if (!options.metrics_csv.empty()) log_metrics(options.metrics_csv, r);
      if (options.on_record) options.on_record(r);
      result.records.push_back(r);
    }
    if (options.checkpoint_every > 0 && done % options.checkpoint_every == 0) save(done);
  }
  save(result.iterations);
  return result;
}

TrainResult pretrain_sr(sr::SRModel& sr, std::span<const Sample> train,
                        const TrainConfig& config, const RunOptions& options,
                        const det::DetectorModel* det) {
  for (const auto& s : config.schedule.segments) {
    if (s.weights.beta != 0.0) {
      throw std::invalid_argument("pretrain_sr: schedule must be reconstruction-only");
    }
  }
  return train_sr(sr, det, train, config, options);
}

TrainResult train_tdsr(sr::SRModel& sr, const det::DetectorModel& det,
                       std::span<const Sample> train, const TrainConfig& config,
                       const RunOptions& options) {
  return train_sr(sr, &det, train, config, options);
}

void DetTrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("DetTrainConfig: iterations must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("DetTrainConfig: batch_size must be >= 1");
  if (!(base_lr > 0.0)) throw std::invalid_argument("DetTrainConfig: base_lr must be > 0");
}

DetTrainResult pretrain_detector(det::DetectorModel& det, std::span<const Sample> train,
                                 const DetTrainConfig& config,
                                 const std::filesystem::path& abort_checkpoint) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("pretrain_detector: empty training set");
  if (det.frozen()) throw std::logic_error("pretrain_detector: detector is already frozen");
  Adam adam(config.adam);
  DetTrainResult result;
  for (std::int64_t it = 0; it < config.iterations; ++it) {
    const double lr =
        learning_rate(config.base_lr, config.lr_decay_every, config.lr_decay_factor, it);
    det.params().zero_grad();
    double loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const Sample s = training_sample(train, config.seed, it, b, config.hflip, 0);
      nn::Tape tape;
      const nn::Var x = tape.constant(nn::to_tensor(s.image));
      const det::DetectorHeads heads = det::detector_forward(tape, det, x, true);
      det::DetectionLoss dl =
          det::detection_loss(tape.value(heads.class_logits), tape.value(heads.offsets),
                              det.anchors(), s.gt, config.loss, det.config().variances);
      loss += dl.task;
      if (dl.skipped) continue;
      dl.grad_logits *= 1.0 / config.batch_size;
      dl.grad_offsets *= 1.0 / config.batch_size;
      const std::array<nn::Tape::Seed, 2> seeds{
          nn::Tape::Seed{heads.class_logits, std::move(dl.grad_logits)},
          nn::Tape::Seed{heads.offsets, std::move(dl.grad_offsets)}};
      tape.backward(seeds);
    }
    loss /= config.batch_size;
    if (!std::isfinite(loss) || !det.params().grads_finite()) {
      if (!abort_checkpoint.empty()) save_detector(abort_checkpoint, det);
      throw NumericalError("detector loss is not finite at iteration " + std::to_string(it));
    }
    clip_grad_norm(det.params(), config.clip_norm);
    adam.step(det.params(), lr);
    result.losses.push_back(loss);
  }
  det.freeze();
  return result;
}

}  // namespace tdsr::train

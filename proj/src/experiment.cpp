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

#include "tdsr/experiment.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace tdsr::train {

ConfigError::ConfigError(int line, const std::string& what)
    : std::runtime_error("config line " + std::to_string(line) + ": " + what), line_(line) {}

TrainConfig ExperimentConfig::train_config() const {
  if (iter_divisor < 1) throw std::invalid_argument("iter_divisor must be >= 1");
  TrainConfig c;
  c.schedule = objective::parse_schedule(schedule).scaled(iter_divisor);
  c.base_lr = base_lr;
  c.lr_decay_every = lr_decay_every > 0 ? std::max<std::int64_t>(1, lr_decay_every / iter_divisor) : 0;
  c.lr_decay_factor = lr_decay_factor;
  c.batch_size = batch_size;
  c.adam = {beta1, beta2, eps};
  c.clip_norm = clip_norm;
  c.eval_every = eval_every;
  c.seed = seed;
  c.degradation = {scale_factor, blur_sigma, noise_sigma, seed};
  c.lambda = lambda;
  c.hflip = hflip;
  c.crop_size = crop_size;
  c.validate();
  return c;
}

DetTrainConfig ExperimentConfig::det_train_config() const {
  DetTrainConfig c;
  c.iterations = det_iterations;
  c.batch_size = det_batch_size;
  c.base_lr = det_lr;
  c.lr_decay_every = det_lr_decay_every;
  c.adam = {beta1, beta2, eps};
  c.clip_norm = clip_norm;
  c.seed = seed;
  c.hflip = hflip;
  c.loss.lambda = lambda;
  c.validate();
  return c;
}

sr::SRConfig ExperimentConfig::sr_config() const {
  sr::SRConfig c;
  c.scale_factor = scale_factor;
  c.num_projection_pairs = sr_pairs;
  c.feature_width = sr_width;
  c.bicubic_residual = bicubic_residual;
  c.validate();
  return c;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view v, int line, std::string_view key) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(line, "bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view v, int line, std::string_view key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(line, "bad boolean '" + std::string(v) + "' for " + std::string(key));
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text,
                                         const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  using Setter = std::function<void(std::string_view, int)>;
  auto path = [&](std::filesystem::path& dst) {
    return [&dst, &base_dir](std::string_view v, int) {
      std::filesystem::path p{std::string(v)};
      dst = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
  };
  auto integer = [](auto& dst) {
    return [&dst](std::string_view v, int line) {
      dst = parse_number<std::remove_reference_t<decltype(dst)>>(v, line, "integer");
    };
  };
  auto real = [](double& dst) {
    return [&dst](std::string_view v, int line) { dst = parse_number<double>(v, line, "real"); };
  };
  auto boolean = [](bool& dst) {
    return [&dst](std::string_view v, int line) { dst = parse_bool(v, line, "flag"); };
  };

  const std::map<std::string, Setter, std::less<>> setters{
      {"schedule", [&](std::string_view v, int line) {
         try {
           objective::parse_schedule(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(line, e.what());
         }
         cfg.schedule = std::string(v);
       }},
      {"iter_divisor", integer(cfg.iter_divisor)},
      {"scale_factor", integer(cfg.scale_factor)},
      {"blur_sigma", real(cfg.blur_sigma)},
      {"noise_sigma", real(cfg.noise_sigma)},
      {"seed", integer(cfg.seed)},
      {"base_lr", real(cfg.base_lr)},
      {"lr_decay_every", integer(cfg.lr_decay_every)},
      {"lr_decay_factor", real(cfg.lr_decay_factor)},
      {"batch_size", integer(cfg.batch_size)},
      {"beta1", real(cfg.beta1)},
      {"beta2", real(cfg.beta2)},
      {"eps", real(cfg.eps)},
      {"clip_norm", real(cfg.clip_norm)},
      {"lambda", real(cfg.lambda)},
      {"hflip", boolean(cfg.hflip)},
      {"crop_size", integer(cfg.crop_size)},
      {"eval_every", integer(cfg.eval_every)},
      {"checkpoint_every", integer(cfg.checkpoint_every)},
      {"train_data", path(cfg.train_data)},
      {"eval_data", path(cfg.eval_data)},
      {"eval_limit", integer(cfg.eval_limit)},
      {"detector", path(cfg.detector)},
      {"init_sr", path(cfg.init_sr)},
      {"out_dir", path(cfg.out_dir)},
      {"sr_pairs", integer(cfg.sr_pairs)},
      {"sr_width", integer(cfg.sr_width)},
      {"bicubic_residual", boolean(cfg.bicubic_residual)},
      {"det_iterations", integer(cfg.det_iterations)},
      {"det_batch_size", integer(cfg.det_batch_size)},
      {"det_lr", real(cfg.det_lr)},
      {"det_lr_decay_every", integer(cfg.det_lr_decay_every)},
      {"det_base_width", integer(cfg.det_base_width)},
  };

  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    // Strip a comment unless the '#' sits inside quotes.
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') quoted = !quoted;
      if (raw[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    const std::string_view body = trim(std::string_view(raw).substr(0, cut));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line, "expected key = value");
    const std::string_view key = trim(body.substr(0, eq));
    std::string_view value = trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (value.find('"') != std::string_view::npos) {
      throw ConfigError(line, "unbalanced quotes");
    }
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(line, "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(line, "duplicate key '" + std::string(key) + "'");
    }
    it->second(value, line);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path.parent_path());
}

}  // namespace tdsr::train

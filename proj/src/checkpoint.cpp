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

#include "tdsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace tdsr::train {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

const nn::ParameterStore* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, store] : sections) {
    if (n == name) return &store;
  }
  return nullptr;
}

nn::ParameterStore& Checkpoint::add(const std::string& name, nn::ParameterStore store) {
  sections.emplace_back(name, std::move(store));
  return sections.back().second;
}

namespace {

constexpr char kMagic[8] = {'T', 'D', 'S', 'R', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void finish() {
    out_.close();
    if (!out_) throw std::runtime_error("error writing checkpoint " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  template <typename T>
  T pod() {
    T v{};
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) fail("string length");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("unexpected end of file");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("corrupt checkpoint " + path_.string() + ": " + what);
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void write_store(Writer& w, const nn::ParameterStore& store) {
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(store.size()));
  for (const nn::Parameter& p : store.params()) {
    w.str(p.name);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(p.value.ndim()));
    for (int d : p.value.shape()) w.pod<std::int32_t>(d);
    w.raw(p.value.data(), p.value.size() * sizeof(double));
  }
}

nn::ParameterStore read_store(Reader& r) {
  nn::ParameterStore store;
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto ndim = r.pod<std::uint32_t>();
    if (ndim > 8) r.fail("tensor rank");
    std::vector<int> shape(ndim);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.pod<std::int32_t>();
      if (d < 0) r.fail("negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    if (n > (1ULL << 31)) r.fail("tensor size");
    nn::Tensor t(shape);
    r.raw(t.data(), t.size() * sizeof(double));
    store.add(std::move(name), std::move(t));
  }
  return store;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  // Write to a sibling file first so an interrupted save keeps the old one.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    Writer w(tmp);
    w.raw(kMagic, sizeof kMagic);
    w.pod<std::uint32_t>(Checkpoint::kVersion);
    w.pod<std::int64_t>(ckpt.iteration);
    w.pod<std::uint64_t>(ckpt.config_fingerprint);
    w.str(ckpt.rng_state);
    w.str(ckpt.meta);
    w.pod<std::int64_t>(ckpt.adam_step);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.sections.size()));
    for (const auto& [name, store] : ckpt.sections) {
      w.str(name);
      write_store(w, store);
    }
    w.finish();
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("bad magic");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  c.iteration = r.pod<std::int64_t>();
  c.config_fingerprint = r.pod<std::uint64_t>();
  c.rng_state = r.str();
  c.meta = r.str();
  c.adam_step = r.pod<std::int64_t>();
  const auto sections = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < sections; ++i) {
    std::string name = r.str();
    c.add(name, read_store(r));
  }
  return c;
}

std::string sr_config_json(const sr::SRConfig& cfg) {
  return json{{"scale_factor", cfg.scale_factor},
              {"num_projection_pairs", cfg.num_projection_pairs},
              {"feature_width", cfg.feature_width},
              {"channels", cfg.channels},
              {"bicubic_residual", cfg.bicubic_residual},
              {"slope", cfg.slope}}
      .dump();
}

sr::SRConfig sr_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  sr::SRConfig cfg;
  cfg.scale_factor = j.at("scale_factor").get<int>();
  cfg.num_projection_pairs = j.at("num_projection_pairs").get<int>();
  cfg.feature_width = j.at("feature_width").get<int>();
  cfg.channels = j.at("channels").get<int>();
  cfg.bicubic_residual = j.at("bicubic_residual").get<bool>();
  cfg.slope = j.at("slope").get<double>();
  cfg.validate();
  return cfg;
}

std::string detector_config_json(const det::DetectorConfig& cfg) {
  json maps = json::array();
  for (const auto& m : cfg.maps) {
    maps.push_back({{"grid", m.grid}, {"scales", m.scales}, {"ratios", m.ratios}});
  }
  return json{{"num_classes", cfg.num_classes},
              {"input_size", cfg.input_size},
              {"channels", cfg.channels},
              {"base_width", cfg.base_width},
              {"slope", cfg.slope},
              {"maps", maps},
              {"variances", {cfg.variances.center, cfg.variances.size}}}
      .dump();
}

det::DetectorConfig detector_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  det::DetectorConfig cfg;
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.input_size = j.at("input_size").get<int>();
  cfg.channels = j.at("channels").get<int>();
  cfg.base_width = j.at("base_width").get<int>();
  cfg.slope = j.at("slope").get<double>();
  for (const json& m : j.at("maps")) {
    cfg.maps.push_back({m.at("grid").get<int>(), m.at("scales").get<std::vector<double>>(),
                        m.at("ratios").get<std::vector<double>>()});
  }
  const auto v = j.at("variances").get<std::vector<double>>();
  if (v.size() != 2) throw std::runtime_error("detector config: variances must have 2 entries");
  cfg.variances = {v[0], v[1]};
  cfg.validate();
  return cfg;
}

void restore_parameters(nn::ParameterStore& dst, const nn::ParameterStore& src) {
  if (dst.size() != src.size()) {
    throw std::runtime_error("restore_parameters: expected " + std::to_string(dst.size()) +
                             " tensors, found " + std::to_string(src.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    nn::Parameter& d = dst.params()[i];
    const nn::Parameter& s = src.params()[i];
    if (d.name != s.name || !d.value.same_shape(s.value)) {
      throw std::runtime_error("restore_parameters: tensor " + std::to_string(i) + " is " +
                               s.name + " " + nn::shape_string(s.value.shape()) + ", expected " +
                               d.name + " " + nn::shape_string(d.value.shape()));
    }
    d.value = s.value;
  }
}

namespace {

template <typename Model>
Model load_model(const std::filesystem::path& path, const char* key,
                 auto&& config_from_json, auto&& build) {
  const Checkpoint c = load_checkpoint(path);
  const json meta = json::parse(c.meta.empty() ? "{}" : c.meta);
  if (!meta.contains(key) || c.find(key) == nullptr) {
    throw std::runtime_error(path.string() + " holds no \"" + key + "\" model");
  }
  Model model = build(config_from_json(meta.at(key).dump()));
  restore_parameters(model.params(), *c.find(key));
  return model;
}

}  // namespace

void save_sr(const std::filesystem::path& path, const sr::SRModel& model) {
  Checkpoint c;
  c.meta = json{{"sr", json::parse(sr_config_json(model.config()))}}.dump();
  c.add("sr", model.params());
  save_checkpoint(path, c);
}

sr::SRModel load_sr(const std::filesystem::path& path) {
  return load_model<sr::SRModel>(path, "sr", sr_config_from_json,
                                 [](const sr::SRConfig& cfg) { return sr::build_sr(cfg, 0); });
}

void save_detector(const std::filesystem::path& path, const det::DetectorModel& model) {
  Checkpoint c;
  c.meta = json{{"det", json::parse(detector_config_json(model.config()))}}.dump();
  c.add("det", model.params());
  save_checkpoint(path, c);
}

det::DetectorModel load_detector(const std::filesystem::path& path) {
  det::DetectorModel m = load_model<det::DetectorModel>(
      path, "det", detector_config_from_json,
      [](const det::DetectorConfig& cfg) { return det::build_detector(cfg, 0); });
  m.freeze();
  return m;
}

}  // namespace tdsr::train

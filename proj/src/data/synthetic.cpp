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

#include "tdsr/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "tdsr/core/geometry.hpp"
#include "tdsr/core/rng.hpp"
#include "tdsr/data/dataset.hpp"
#include "tdsr/data/image_io.hpp"

namespace tdsr::data {

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names{"disc", "square", "triangle",
                                              "ring", "cross",  "diamond"};
  return names;
}

void SceneSpec::validate() const {
  if (image_size < 16) throw std::invalid_argument("SceneSpec: image_size must be >= 16");
  if (num_classes < 2 || num_classes > static_cast<int>(shape_names().size())) {
    throw std::invalid_argument("SceneSpec: num_classes must be in 2.." +
                                std::to_string(shape_names().size()));
  }
  if (min_objects < 1 || max_objects < min_objects) {
    throw std::invalid_argument("SceneSpec: need 1 <= min_objects <= max_objects");
  }
  if (!(min_extent > 0.0) || max_extent < min_extent || max_extent > 0.9) {
    throw std::invalid_argument("SceneSpec: need 0 < min_extent <= max_extent <= 0.9");
  }
}

namespace {

// u, v in [0,1] relative to the shape's box.
bool inside(ClassId cls, double u, double v) {
  const double a = 2.0 * u - 1.0;
  const double b = 2.0 * v - 1.0;
  switch (cls) {
    case 1:
      return a * a + b * b <= 1.0;
    case 2:
      return true;
    case 3:
      return std::abs(a) <= v;
    case 4: {
      const double r2 = a * a + b * b;
      return r2 <= 1.0 && r2 >= 0.3;
    }
    case 5:
      return std::abs(a) <= 0.36 || std::abs(b) <= 0.36;
    case 6:
      return std::abs(a) + std::abs(b) <= 1.0;
    default:
      return false;
  }
}

struct Rgb {
  double r, g, b;
  double luma() const { return 0.299 * r + 0.587 * g + 0.114 * b; }
};

}  // namespace

RenderedScene render_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, {index}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const int size = spec.image_size;
  const double s = size;

  // Background: two-tone low-frequency wave plus fine grain.
  const Rgb base{uniform(0.2, 0.8), uniform(0.2, 0.8), uniform(0.2, 0.8)};
  const Rgb alt{std::clamp(base.r + uniform(-0.15, 0.15), 0.0, 1.0),
                std::clamp(base.g + uniform(-0.15, 0.15), 0.0, 1.0),
                std::clamp(base.b + uniform(-0.15, 0.15), 0.0, 1.0)};
  const double angle = uniform(0.0, std::numbers::pi);
  const double freq = 2.0 * std::numbers::pi / (s * uniform(0.25, 0.75));
  const double phase = uniform(0.0, 2.0 * std::numbers::pi);
  RenderedScene scene{Image(3, size, size), {}, {}};
  Image& img = scene.image;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t =
          0.5 + 0.5 * std::sin(freq * (std::cos(angle) * x + std::sin(angle) * y) + phase);
      const double grain = uniform(-0.04, 0.04);
      img.at(0, y, x) = base.r + t * (alt.r - base.r) + grain;
      img.at(1, y, x) = base.g + t * (alt.g - base.g) + grain;
      img.at(2, y, x) = base.b + t * (alt.b - base.b) + grain;
    }
  }

  const int count = std::uniform_int_distribution<int>(spec.min_objects, spec.max_objects)(rng);
  for (int k = 0; k < count; ++k) {
    const ClassId cls = std::uniform_int_distribution<int>(1, spec.num_classes)(rng);
    const double extent = uniform(spec.min_extent, spec.max_extent) * s;
    const double aspect = std::exp(uniform(std::log(0.8), std::log(1.25)));
    const double w = std::min(extent * std::sqrt(aspect), s - 2.0);
    const double h = std::min(extent / std::sqrt(aspect), s - 2.0);

    Box box;
    bool placed = false;
    for (int attempt = 0; attempt < 30 && !placed; ++attempt) {
      const double x0 = uniform(1.0, s - 1.0 - w);
      const double y0 = uniform(1.0, s - 1.0 - h);
      box = {x0, y0, x0 + w, y0 + h};
      placed = std::none_of(scene.gt.boxes.begin(), scene.gt.boxes.end(),
                            [&](const Box& other) { return iou(box, other) > 0.1; });
    }
    if (!placed) continue;

    Rgb color{};
    for (int tries = 0; tries < 50; ++tries) {
      color = {unit(rng), unit(rng), unit(rng)};
      if (std::abs(color.luma() - base.luma()) > 0.2) break;
    }
    const double stripe_angle = uniform(0.0, std::numbers::pi);
    const double stripe_freq = 2.0 * std::numbers::pi / uniform(3.0, 8.0);
    const double stripe_amp = uniform(0.0, 0.1);

    std::vector<double> mask(static_cast<std::size_t>(size) * size, 0.0);
    const int px0 = static_cast<int>(std::floor(box.xmin));
    const int py0 = static_cast<int>(std::floor(box.ymin));
    const int px1 = std::min(size - 1, static_cast<int>(std::ceil(box.xmax)));
    const int py1 = std::min(size - 1, static_cast<int>(std::ceil(box.ymax)));
    for (int y = py0; y <= py1; ++y) {
      for (int x = px0; x <= px1; ++x) {
        int hits = 0;
        for (int sy = 0; sy < 4; ++sy) {
          for (int sx = 0; sx < 4; ++sx) {
            const double u = (x + (sx + 0.5) / 4.0 - box.xmin) / w;
            const double v = (y + (sy + 0.5) / 4.0 - box.ymin) / h;
            if (u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0 && inside(cls, u, v)) ++hits;
          }
        }
        if (hits == 0) continue;
        const double cov = hits / 16.0;
        mask[static_cast<std::size_t>(y) * size + x] = cov;
        const double tex =
            stripe_amp *
            std::sin(stripe_freq * (std::cos(stripe_angle) * x + std::sin(stripe_angle) * y));
        const double fg[3] = {color.r + tex, color.g + tex, color.b + tex};
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = img.at(c, y, x) * (1.0 - cov) + fg[c] * cov;
      }
    }
    scene.gt.boxes.push_back(box);
    scene.gt.labels.push_back(cls);
    scene.masks.push_back(std::move(mask));
  }
  img.clamp01();
  return scene;
}

std::filesystem::path generate_synthetic_dataset(const SceneSpec& spec, int n,
                                                 const std::filesystem::path& out_dir) {
  spec.validate();
  if (n < 0) throw std::invalid_argument("generate_synthetic_dataset: n must be >= 0");
  std::filesystem::create_directories(out_dir / "images");
  const auto manifest = out_dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%06d.png", i);
    const RenderedScene scene = render_scene(spec, static_cast<std::uint64_t>(i));
    write_image(out_dir / name, scene.image);
    out << manifest_line(name, scene.gt) << '\n';
  }
  out.close();
  if (!out) throw std::runtime_error("error writing " + manifest.string());

  DatasetMeta meta;
  meta.num_classes = spec.num_classes;
  meta.image_size = spec.image_size;
  meta.class_names.assign(shape_names().begin(), shape_names().begin() + spec.num_classes);
  write_meta(out_dir / "meta.json", meta);
  return manifest;
}

}  // namespace tdsr::data

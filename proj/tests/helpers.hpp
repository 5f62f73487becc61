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

#include <cmath>
#include <random>

#include "tdsr/core/types.hpp"

namespace tdsr::testing {

inline Image random_image(int c, int h, int w, std::uint64_t seed, double lo = 0.0,
                          double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(c, h, w);
  for (double& v : img.data()) v = u(rng);
  return img;
}

inline Box random_box(std::mt19937_64& rng, double extent, double min_side = 0.5) {
  std::uniform_real_distribution<double> pos(0.0, extent);
  std::uniform_real_distribution<double> side(min_side, extent / 2);
  const double x = pos(rng);
  const double y = pos(rng);
  return {x, y, x + side(rng), y + side(rng)};
}

/// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace tdsr::testing

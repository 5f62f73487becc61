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

#include <doctest.h>

#include "tdsr/experiment.hpp"

using namespace tdsr;
using namespace tdsr::train;

TEST_CASE("experiment config parsing") {
  const ExperimentConfig c = parse_experiment_config(R"(
# TDSR-0.01 at desk scale
schedule = "100k:1:0+200k:1:0.01"
iter_divisor = 100
scale_factor = 8
blur_sigma = 1.0   # trailing comment
noise_sigma = 0
seed = 42
train_data = data/train/manifest.jsonl
detector = "/abs/det.ckpt"
hflip = false
sr_width = 8
)",
                                                     "/base");
  CHECK(c.schedule == "100k:1:0+200k:1:0.01");
  CHECK(c.iter_divisor == 100);
  CHECK(c.scale_factor == 8);
  CHECK(c.blur_sigma == 1.0);
  CHECK(c.seed == 42);
  CHECK(c.train_data == std::filesystem::path("/base/data/train/manifest.jsonl"));
  CHECK(c.detector == std::filesystem::path("/abs/det.ckpt"));
  CHECK_FALSE(c.hflip);

  const TrainConfig t = c.train_config();
  CHECK(t.schedule.total() == 3000);
  CHECK(t.schedule.segments[1].weights.beta == 0.01);
  CHECK(t.lr_decay_every == 1000);
  CHECK(t.degradation.scale_factor == 8);
  CHECK(t.degradation.blur_sigma == 1.0);
  CHECK(t.seed == 42);
  CHECK(c.sr_config().feature_width == 8);
  CHECK(c.sr_config().scale_factor == 8);
}

TEST_CASE("experiment config errors name the line") {
  auto line_of = [](const char* text) {
    try {
      parse_experiment_config(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("seed = 1\nbogus_key = 3\n") == 2);
  CHECK(line_of("seed = 1\nseed = 2\n") == 2);
  CHECK(line_of("\n\nseed\n") == 3);
  CHECK(line_of("scale_factor = four\n") == 1);
  CHECK(line_of("batch_size = 2.5\n") == 1);
  CHECK(line_of("hflip = maybe\n") == 1);
  CHECK(line_of("schedule = \"100k:1:0\n") == 1);
  CHECK(line_of("seed = 3") == -1);
  CHECK_THROWS(load_experiment_config("/nonexistent/experiment.cfg"));
}

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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "tdsr/checkpoint.hpp"
#include "tdsr/data/dataset.hpp"
#include "tdsr/data/image_io.hpp"
#include "tdsr/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tdsr_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(TDSR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("no-such-command") == 1);
  CHECK(run("synth") == 1);
  CHECK(run("degrade --in /nonexistent.png --out x.png") == 1);
  CHECK(run("eval --sr bicubic") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("end-to-end pipeline through the command line") {
  TempDir dir;
  const fs::path d = dir.path;
  REQUIRE(run("synth --out " + (d / "train").string() + " --n 12 --size 32 --seed 1") == 0);
  REQUIRE(run("synth --out " + (d / "test").string() + " --n 4 --size 32 --seed 2") == 0);
  const fs::path train_manifest = d / "train" / "manifest.jsonl";
  const fs::path test_manifest = d / "test" / "manifest.jsonl";
  CHECK(tdsr::data::load_dataset(train_manifest).size() == 12);

  const fs::path img = d / "train" / "images" / "000000.png";
  REQUIRE(run("degrade --in " + img.string() + " --factor 4 --noise-sigma 0.1 --seed 3 --out " +
              (d / "lr.png").string()) == 0);
  CHECK(tdsr::data::read_image(d / "lr.png").width() == 8);

  write_file(d / "det.cfg", "train_data = train/manifest.jsonl\nout_dir = det\n"
                            "det_iterations = 3\ndet_batch_size = 2\ndet_base_width = 4\n");
  REQUIRE(run("pretrain-det --config " + (d / "det.cfg").string()) == 0);
  const fs::path det = d / "det" / "detector.ckpt";
  CHECK(tdsr::train::load_detector(det).frozen());

  write_file(d / "ft.cfg", "schedule = \"4:1:0\"\ntrain_data = train/manifest.jsonl\n"
                           "eval_data = test/manifest.jsonl\nout_dir = ft\nbatch_size = 2\n"
                           "eval_every = 2\nsr_width = 4\n");
  REQUIRE(run("pretrain-sr --config " + (d / "ft.cfg").string()) == 0);
  CHECK(tdsr::train::read_metrics_csv(d / "ft" / "metrics.csv").size() == 2);

  write_file(d / "td.cfg", "schedule = \"4:1:0+4:1:0.01\"\ntrain_data = train/manifest.jsonl\n"
                           "eval_data = test/manifest.jsonl\nout_dir = td\nbatch_size = 2\n"
                           "eval_every = 2\nsr_width = 4\ndetector = det/detector.ckpt\n"
                           "init_sr = ft/sr.ckpt\n");
  REQUIRE(run("train --config " + (d / "td.cfg").string()) == 0);
  const auto recs = tdsr::train::read_metrics_csv(d / "td" / "metrics.csv");
  REQUIRE(recs.size() == 4);
  CHECK(recs[3].beta == 0.01);
  // Resuming a finished run is a no-op that keeps the log.
  CHECK(run("train --config " + (d / "td.cfg").string() + " --resume " +
            (d / "td" / "checkpoint.ckpt").string()) == 0);
  CHECK(tdsr::train::read_metrics_csv(d / "td" / "metrics.csv") == recs);

  const std::string common = " --det " + det.string() + " --data " + test_manifest.string() +
                             " --out " + (d / "table.csv").string();
  CHECK(run("eval --sr hr" + common) == 0);
  CHECK(run("eval --sr bicubic" + common) == 0);
  CHECK(run("eval --sr lr-pad" + common) == 0);
  CHECK(run("eval --sr " + (d / "td" / "sr.ckpt").string() + common) == 0);
  std::ifstream table(d / "table.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(table, l);) lines.push_back(l);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0].rfind("method,scale_factor,psnr,ssim,map", 0) == 0);
  CHECK(lines[1].rfind("HR,4,100.0000", 0) == 0);
  CHECK(lines[2].rfind("Bicubic,4,", 0) == 0);
  CHECK(lines[3].rfind("LR,4,", 0) == 0);

  CHECK(run("detect --det " + det.string() + " --image " + img.string() + " --out " +
            (d / "det.png").string()) == 0);
  CHECK(fs::exists(d / "det.png"));
  CHECK(run("detect --det " + det.string() + " --sr " + (d / "td" / "sr.ckpt").string() +
            " --image " + (d / "lr.png").string() + " --out " + (d / "det_sr.png").string()) == 0);
  CHECK(run("panel --det " + det.string() + " --data " + test_manifest.string() + " --sr TDSR=" +
            (d / "td" / "sr.ckpt").string() + " --out " + (d / "panel.png").string()) == 0);
  CHECK(fs::exists(d / "panel.png"));
  CHECK(run("plot --csv " + (d / "td" / "metrics.csv").string() + " --out " +
            (d / "curves.png").string()) == 0);
  CHECK(fs::exists(d / "curves.png"));

  SUBCASE("runtime and configuration failures") {
    // A detector of the wrong input size is a runtime failure.
    CHECK(run("detect --det " + det.string() + " --image " + (d / "lr.png").string() + " --out " +
              (d / "x.png").string()) == 2);
    write_file(d / "bad.cfg", "schedule = \"4:1:zero\"\n");
    CHECK(run("train --config " + (d / "bad.cfg").string()) == 1);
    write_file(d / "bad2.cfg", "nonsense = 1\n");
    CHECK(run("train --config " + (d / "bad2.cfg").string()) == 1);
    write_file(d / "empty.csv", std::string(tdsr::train::kMetricsHeader) + "\n");
    CHECK(run("plot --csv " + (d / "empty.csv").string() + " --out " + (d / "e.png").string()) == 2);
    write_file(d / "broken.jsonl", "{\"image\": 1}\n");
    CHECK(run("eval --sr bicubic --det " + det.string() + " --data " + (d / "broken.jsonl").string() +
              " --out " + (d / "t2.csv").string()) == 2);
  }
}

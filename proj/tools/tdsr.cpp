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

// Command-line entry points: dataset synthesis, degradation, training,
// evaluation, detection rendering and curve plotting.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tdsr/checkpoint.hpp"
#include "tdsr/data/dataset.hpp"
#include "tdsr/data/image_io.hpp"
#include "tdsr/data/plot.hpp"
#include "tdsr/data/render.hpp"
#include "tdsr/data/synthetic.hpp"
#include "tdsr/degradation.hpp"
#include "tdsr/experiment.hpp"
#include "tdsr/metrics.hpp"
#include "tdsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace tdsr;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<Sample> load_samples(const fs::path& manifest, int limit) {
  const data::Dataset ds = data::load_dataset(manifest);
  std::vector<Sample> out;
  const std::size_t n = limit > 0 ? std::min<std::size_t>(ds.size(), limit) : ds.size();
  for (std::size_t i = 0; i < n; ++i) out.push_back(ds.sample(i));
  return out;
}

void print_record(const train::MetricsRecord& r) {
  std::printf("iter %lld  alpha %g beta %g  rec %.6f  task %.4f  psnr %.3f  map %.2f\n",
              static_cast<long long>(r.iteration), r.alpha, r.beta, r.loss_rec, r.loss_task,
              r.psnr, r.map);
  std::fflush(stdout);
}

int run_synth(const data::SceneSpec& spec, int n, const fs::path& out) {
  const fs::path manifest = data::generate_synthetic_dataset(spec, n, out);
  std::printf("wrote %d images, manifest %s\n", n, manifest.c_str());
  return 0;
}

int run_degrade(const fs::path& in, const degradation::DegradationSpec& spec, const fs::path& out,
                const fs::path& hr_out) {
  const Image hr = data::read_image(in);
  const auto pair = degradation::make_pair(hr, {}, spec);
  data::write_image(out, pair.lr);
  if (!hr_out.empty()) data::write_image(hr_out, pair.target_hr);
  std::printf("%dx%d -> %dx%d\n", hr.width(), hr.height(), pair.lr.width(), pair.lr.height());
  return 0;
}

int run_pretrain_det(const fs::path& config_path) {
  const auto cfg = train::load_experiment_config(config_path);
  if (cfg.train_data.empty()) throw UsageError("config needs train_data");
  const data::Dataset ds = data::load_dataset(cfg.train_data);
  const auto train_set = ds.load_all();
  if (train_set.empty()) throw UsageError("empty training set");
  auto det_cfg = det::default_detector_config(ds.num_classes(), train_set.front().image.height());
  det_cfg.base_width = cfg.det_base_width;
  det::DetectorModel det = det::build_detector(det_cfg, cfg.seed);
  fs::create_directories(cfg.out_dir);
  const fs::path out = cfg.out_dir / "detector.ckpt";
  const auto result =
      train::pretrain_detector(det, train_set, cfg.det_train_config(), cfg.out_dir / "detector.abort.ckpt");
  train::save_detector(out, det);
  std::printf("trained %zu iterations, final loss %.4f, saved %s\n", result.losses.size(),
              result.losses.empty() ? 0.0 : result.losses.back(), out.c_str());
  if (!cfg.eval_data.empty()) {
    const auto eval = load_samples(cfg.eval_data, cfg.eval_limit);
    degradation::DegradationSpec spec{cfg.scale_factor, 0.0, 0.0, cfg.seed};
    const auto row = metrics::evaluate_dataset(metrics::Upscaler::hr(), det, eval, spec);
    std::printf("held-out HR mAP %.2f\n", row.map);
  }
  return 0;
}

int run_train(const fs::path& config_path, const fs::path& resume, bool task) {
  const auto cfg = train::load_experiment_config(config_path);
  if (cfg.train_data.empty()) throw UsageError("config needs train_data");
  const train::TrainConfig tc = cfg.train_config();
  const auto train_set = load_samples(cfg.train_data, 0);
  std::vector<Sample> eval_set;
  if (!cfg.eval_data.empty()) eval_set = load_samples(cfg.eval_data, cfg.eval_limit);

  std::optional<det::DetectorModel> det;
  if (!cfg.detector.empty()) det = train::load_detector(cfg.detector);
  if (task && !det) throw UsageError("train needs a detector checkpoint (detector = ...)");

  sr::SRModel model = cfg.init_sr.empty() ? sr::build_sr(cfg.sr_config(), cfg.seed)
                                          : train::load_sr(cfg.init_sr);
  fs::create_directories(cfg.out_dir);
  std::optional<train::Checkpoint> ckpt;
  if (!resume.empty()) ckpt = train::load_checkpoint(resume);

  train::RunOptions options;
  options.eval_samples = eval_set;
  options.metrics_csv = cfg.out_dir / "metrics.csv";
  options.checkpoint = cfg.out_dir / "checkpoint.ckpt";
  options.checkpoint_every = cfg.checkpoint_every;
  options.resume = ckpt ? &*ckpt : nullptr;
  options.on_record = print_record;

  const det::DetectorModel* det_ptr = det ? &*det : nullptr;
  const auto result = task ? train::train_tdsr(model, *det, train_set, tc, options)
                           : train::pretrain_sr(model, train_set, tc, options, det_ptr);
  train::save_sr(cfg.out_dir / "sr.ckpt", model);
  std::printf("finished at iteration %lld, saved %s\n", static_cast<long long>(result.iterations),
              (cfg.out_dir / "sr.ckpt").c_str());
  return 0;
}

metrics::Upscaler parse_upscaler(const std::string& spec, std::optional<sr::SRModel>& holder) {
  if (spec == "bicubic") return metrics::Upscaler::bicubic();
  if (spec == "lr-pad") return metrics::Upscaler::lr_pad();
  if (spec == "hr") return metrics::Upscaler::hr();
  holder = train::load_sr(spec);
  return metrics::Upscaler::sr(*holder, fs::path(spec).stem().string());
}

int run_eval(const std::string& sr_spec, const fs::path& det_path, const fs::path& data,
             const degradation::DegradationSpec& spec, const fs::path& out, int limit,
             const std::string& ap) {
  const det::DetectorModel det = train::load_detector(det_path);
  std::optional<sr::SRModel> holder;
  const metrics::Upscaler up = parse_upscaler(sr_spec, holder);
  if (holder && holder->scale_factor() != spec.scale_factor) {
    throw UsageError("SR model is " + std::to_string(holder->scale_factor()) + "x but --factor is " +
                     std::to_string(spec.scale_factor));
  }
  const auto samples = load_samples(data, limit);
  metrics::EvalOptions options;
  options.ap.method = ap == "area" ? metrics::ApMethod::kArea : metrics::ApMethod::kElevenPoint;
  const auto row = metrics::evaluate_dataset(up, det, samples, spec, options);
  const bool fresh = !fs::exists(out) || fs::file_size(out) == 0;
  std::ofstream f(out, std::ios::app);
  if (fresh) f << metrics::EvalRow::csv_header(det.num_classes()) << '\n';
  f << row.to_csv(det.num_classes()) << '\n';
  if (!f) throw std::runtime_error("cannot write " + out.string());
  std::printf("%s\n", row.to_csv(det.num_classes()).c_str());
  return 0;
}

int run_detect(const fs::path& det_path, const fs::path& sr_path, const fs::path& image,
               const fs::path& out, double score, int zoom) {
  const det::DetectorModel det = train::load_detector(det_path);
  Image input = data::read_image(image);
  if (!sr_path.empty()) input = sr::sr_forward(train::load_sr(sr_path), input).clamped();
  det::DetectParams params;
  params.score_threshold = score;
  const DetectionSet dets = det::detect(det, input, params);
  data::RenderOptions ro;
  ro.zoom = zoom;
  ro.class_names = data::shape_names();
  data::write_image(out, data::render_detections(input, dets, nullptr, ro));
  for (const auto& d : dets) {
    std::printf("%d %.3f [%.1f %.1f %.1f %.1f]\n", d.label, d.score, d.box.xmin, d.box.ymin,
                d.box.xmax, d.box.ymax);
  }
  return 0;
}

int run_panel(const fs::path& det_path, const fs::path& data, int index,
              const std::vector<std::string>& models, const degradation::DegradationSpec& spec,
              const fs::path& out, double score, int zoom) {
  const det::DetectorModel det = train::load_detector(det_path);
  const data::Dataset ds = data::load_dataset(data);
  const Sample s = ds.sample(static_cast<std::size_t>(index));
  const auto pair = degradation::make_pair(s.image, s.gt, metrics::sample_spec(spec, index));
  det::DetectParams params;
  params.score_threshold = score;
  data::RenderOptions ro;
  ro.zoom = zoom;
  ro.class_names = ds.meta().class_names;

  std::vector<std::pair<std::string, Image>> panels;
  auto add = [&](const std::string& caption, const metrics::Upscaler& up) {
    const Image img = metrics::upscale(up, pair);
    panels.emplace_back(caption, data::render_detections(img, det::detect(det, img, params),
                                                         nullptr, ro));
  };
  add("HR", metrics::Upscaler::hr());
  add("LR", metrics::Upscaler::lr_pad());
  add("Bicubic", metrics::Upscaler::bicubic());
  std::vector<sr::SRModel> loaded;
  loaded.reserve(models.size());
  for (const std::string& m : models) {
    const auto eq = m.find('=');
    if (eq == std::string::npos) throw UsageError("--sr expects LABEL=CHECKPOINT, got " + m);
    loaded.push_back(train::load_sr(m.substr(eq + 1)));
    add(m.substr(0, eq), metrics::Upscaler::sr(loaded.back(), m.substr(0, eq)));
  }
  data::write_image(out, data::make_panel(panels));
  return 0;
}

int run_plot(const fs::path& csv, const fs::path& out) {
  const auto layout = data::plot_curves(csv, out);
  std::printf("%zu mAP points, %zu PSNR points, %zu boundaries\n", layout.map_points.size(),
              layout.psnr_points.size(), layout.boundary_iterations.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-driven super-resolution: training and evaluation tools"};
  app.require_subcommand(1);

  data::SceneSpec scene;
  int synth_n = 100;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic shapes dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "number of images")->check(CLI::NonNegativeNumber);
  synth->add_option("--size", scene.image_size, "image side in pixels");
  synth->add_option("--classes", scene.num_classes, "number of shape classes");
  synth->add_option("--seed", scene.seed, "corpus seed");
  synth->add_option("--min-objects", scene.min_objects);
  synth->add_option("--max-objects", scene.max_objects);
  synth->add_option("--min-extent", scene.min_extent, "smallest object side / image side");
  synth->add_option("--max-extent", scene.max_extent, "largest object side / image side");

  degradation::DegradationSpec dspec;
  fs::path deg_in, deg_out, deg_hr_out;
  auto* degrade = app.add_subcommand("degrade", "blur, add noise and downscale one image");
  degrade->add_option("--in", deg_in)->required()->check(CLI::ExistingFile);
  degrade->add_option("--out", deg_out)->required();
  degrade->add_option("--hr-out", deg_hr_out, "also write the cropped clean HR target");
  degrade->add_option("--factor", dspec.scale_factor)->check(CLI::IsMember({2, 4, 8}));
  degrade->add_option("--blur-sigma", dspec.blur_sigma);
  degrade->add_option("--noise-sigma", dspec.noise_sigma);
  degrade->add_option("--seed", dspec.seed);

  fs::path config, resume;
  auto* pretrain_det = app.add_subcommand("pretrain-det", "train the detector on clean HR data");
  pretrain_det->add_option("--config", config)->required()->check(CLI::ExistingFile);
  auto* pretrain_sr = app.add_subcommand("pretrain-sr", "reconstruction-only SR training");
  pretrain_sr->add_option("--config", config)->required()->check(CLI::ExistingFile);
  pretrain_sr->add_option("--resume", resume)->check(CLI::ExistingFile);
  auto* train = app.add_subcommand("train", "task-driven SR training with a frozen detector");
  train->add_option("--config", config)->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume)->check(CLI::ExistingFile);

  std::string sr_spec;
  fs::path det_path, data_path, out_path;
  int limit = 0;
  std::string ap = "11pt";
  degradation::DegradationSpec espec;
  auto* eval = app.add_subcommand("eval", "append one evaluation row to a CSV");
  eval->add_option("--sr", sr_spec, "SR checkpoint, or bicubic | lr-pad | hr")->required();
  eval->add_option("--det", det_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out_path)->required();
  eval->add_option("--factor", espec.scale_factor)->check(CLI::IsMember({2, 4, 8}));
  eval->add_option("--blur-sigma", espec.blur_sigma);
  eval->add_option("--noise-sigma", espec.noise_sigma);
  eval->add_option("--seed", espec.seed);
  eval->add_option("--limit", limit, "evaluate the first N images only");
  eval->add_option("--ap", ap, "AP interpolation")->check(CLI::IsMember({"11pt", "area"}));

  fs::path sr_ckpt, image;
  double score = 0.5;
  int zoom = 4;
  auto* detect = app.add_subcommand("detect", "run detection on one image and draw it");
  detect->add_option("--det", det_path)->required()->check(CLI::ExistingFile);
  detect->add_option("--sr", sr_ckpt, "super-resolve the (LR) image first")->check(CLI::ExistingFile);
  detect->add_option("--image", image)->required()->check(CLI::ExistingFile);
  detect->add_option("--out", out_path)->required();
  detect->add_option("--score", score, "score threshold");
  detect->add_option("--zoom", zoom, "drawing enlargement")->check(CLI::PositiveNumber);

  int index = 0;
  std::vector<std::string> panel_models;
  auto* panel = app.add_subcommand("panel", "HR | LR | bicubic | SR... detection strip");
  panel->add_option("--det", det_path)->required()->check(CLI::ExistingFile);
  panel->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  panel->add_option("--index", index, "image index in the manifest");
  panel->add_option("--sr", panel_models, "LABEL=CHECKPOINT, repeatable");
  panel->add_option("--out", out_path)->required();
  panel->add_option("--factor", espec.scale_factor)->check(CLI::IsMember({2, 4, 8}));
  panel->add_option("--blur-sigma", espec.blur_sigma);
  panel->add_option("--noise-sigma", espec.noise_sigma);
  panel->add_option("--seed", espec.seed);
  panel->add_option("--score", score);
  panel->add_option("--zoom", zoom)->check(CLI::PositiveNumber);

  fs::path csv;
  auto* plot = app.add_subcommand("plot", "plot mAP and PSNR curves from a metrics CSV");
  plot->add_option("--csv", csv)->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*synth) return run_synth(scene, synth_n, synth_out);
    if (*degrade) return run_degrade(deg_in, dspec, deg_out, deg_hr_out);
    if (*pretrain_det) return run_pretrain_det(config);
    if (*pretrain_sr) return run_train(config, resume, false);
    if (*train) return run_train(config, resume, true);
    if (*eval) return run_eval(sr_spec, det_path, data_path, espec, out_path, limit, ap);
    if (*detect) return run_detect(det_path, sr_ckpt, image, out_path, score, zoom);
    if (*panel) {
      return run_panel(det_path, data_path, index, panel_models, espec, out_path, score, zoom);
    }
    if (*plot) return run_plot(csv, out_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const train::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const objective::ScheduleParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

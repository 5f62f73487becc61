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

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "tdsr/metrics.hpp"

using namespace tdsr;
using namespace tdsr::metrics;

namespace {

// Direct windowed SSIM: every valid 11x11 window evaluated from scratch.
double ssim_oracle(const Image& a, const Image& b) {
  const Image x = to_gray(a), y = to_gray(b);
  double w[11][11], norm = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) norm += w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + 11 <= x.height(); ++y0)
    for (int x0 = 0; x0 + 11 <= x.width(); ++x0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double g = w[i][j] / norm, u = x.at(0, y0 + i, x0 + j), v = y.at(0, y0 + i, x0 + j);
          mx += g * u;
          my += g * v;
          sxx += g * u * u;
          syy += g * v * v;
          sxy += g * u * v;
        }
      sxx -= mx * mx;
      syy -= my * my;
      sxy -= mx * my;
      total += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++count;
    }
  return total / count;
}

// TP flag of every detection of class cls in one image, aligned with dets
// (other classes get false). Detections claim gts in score order.
std::vector<bool> tp_flags(const DetectionSet& dets, const GroundTruth& gt, ClassId cls) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < dets.size(); ++k)
    if (dets[k].label == cls) order.push_back(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t p, std::size_t q) { return dets[p].score > dets[q].score; });
  std::vector<bool> used(gt.size(), false), flags(dets.size(), false);
  for (std::size_t k : order) {
    int best = -1;
    double best_iou = -1;
    for (std::size_t j = 0; j < gt.size(); ++j)
      if (gt.labels[j] == cls && iou(dets[k].box, gt.boxes[j]) > best_iou) {
        best_iou = iou(dets[k].box, gt.boxes[j]);
        best = static_cast<int>(j);
      }
    flags[k] = best >= 0 && best_iou > 0.5 && !used[best];
    if (flags[k]) used[best] = true;
  }
  return flags;
}

// Exhaustive reference: TP flags per image from that image's own ranking,
// then precision/recall at every global score cutoff.
double ap_oracle(const std::vector<DetectionSet>& dets, const std::vector<GroundTruth>& gts,
                 ClassId cls, ApMethod method) {
  std::vector<std::pair<double, bool>> flagged;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    npos += std::count(gts[i].labels.begin(), gts[i].labels.end(), cls);
    const std::vector<bool> tp = tp_flags(dets[i], gts[i], cls);
    for (std::size_t k = 0; k < dets[i].size(); ++k)
      if (dets[i][k].label == cls) flagged.emplace_back(dets[i][k].score, tp[k]);
  }
  std::sort(flagged.rbegin(), flagged.rend());
  std::vector<double> prec, rec;
  for (std::size_t k = 1; k <= flagged.size(); ++k) {
    const auto tp = std::count_if(flagged.begin(), flagged.begin() + k, [](auto& f) { return f.second; });
    prec.push_back(static_cast<double>(tp) / k);
    rec.push_back(static_cast<double>(tp) / npos);
  }
  if (method == ApMethod::kElevenPoint) {
    double ap = 0;
    for (int t = 0; t <= 10; ++t) {
      double p = 0;
      for (std::size_t k = 0; k < rec.size(); ++k)
        if (rec[k] >= t / 10.0) p = std::max(p, prec[k]);
      ap += p / 11;
    }
    return ap;
  }
  double ap = 0, last = 0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec[k] == last) continue;
    ap += (rec[k] - last) * *std::max_element(prec.begin() + k, prec.end());
    last = rec[k];
  }
  return ap;
}

struct Scene {
  std::vector<DetectionSet> dets;
  std::vector<GroundTruth> gts;
};

Scene random_scene(std::mt19937_64& rng, int images, int classes) {
  Scene s;
  std::uniform_int_distribution<int> count(0, 3), label(1, classes);
  std::uniform_real_distribution<double> score(0.0, 1.0), jitter(-3.0, 3.0);
  for (int i = 0; i < images; ++i) {
    GroundTruth gt;
    DetectionSet d;
    for (int k = count(rng); k > 0; --k) {
      const Box b = testing::random_box(rng, 40.0, 5.0);
      gt.boxes.push_back(b);
      gt.labels.push_back(label(rng));
      // Near-hits, duplicates and misses.
      for (int n = count(rng); n > 0; --n) {
        Box m{b.xmin + jitter(rng), b.ymin + jitter(rng), b.xmax + jitter(rng), b.ymax + jitter(rng)};
        if (m.valid()) d.push_back({m, score(rng) < 0.8 ? gt.labels.back() : label(rng), score(rng)});
      }
    }
    for (int n = count(rng); n > 0; --n) d.push_back({testing::random_box(rng, 40.0, 5.0), label(rng), score(rng)});
    s.gts.push_back(gt);
    s.dets.push_back(d);
  }
  return s;
}

}  // namespace

TEST_CASE("psnr") {
  const Image x(3, 8, 8, 0.5);
  const Image y(3, 8, 8, 0.6);
  CHECK(psnr(x, y) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr(x, x) == kPsnrCap);
  CHECK_THROWS_AS(psnr(x, Image(3, 8, 7)), std::invalid_argument);
  // x_hat is clamped first.
  CHECK(psnr(Image(1, 4, 4, 1.0), Image(1, 4, 4, 1.7)) == kPsnrCap);

  const Image a = testing::random_image(3, 9, 11, 1);
  const Image b = testing::random_image(3, 9, 11, 2);
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += std::pow(a.data()[i] - b.data()[i], 2);
  mse /= a.size();
  CHECK(std::abs(psnr(a, b) - 10 * std::log10(1 / mse)) <= 1e-9);

  double prev = INFINITY;
  for (double d = 0.01; d < 0.5; d += 0.01) {
    const double v = psnr(x, Image(3, 8, 8, 0.5 + d));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("ssim") {
  const Image a = testing::random_image(3, 20, 17, 3);
  const Image b = testing::random_image(3, 20, 17, 4);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-9));
  const double c1 = 1e-4;
  CHECK(ssim(Image(1, 16, 16, 0.5), Image(1, 16, 16, 0.6)) ==
        doctest::Approx((0.6 + c1) / (0.61 + c1)).epsilon(1e-9));
  CHECK_THROWS_AS(ssim(Image(1, 10, 30), Image(1, 10, 30)), std::invalid_argument);

  Image rgb(3, 1, 1);
  rgb.at(0, 0, 0) = 1.0;
  rgb.at(1, 0, 0) = 0.5;
  CHECK(to_gray(rgb).at(0, 0, 0) == doctest::Approx(0.299 + 0.2935));
}

TEST_CASE("voc ap examples") {
  const GroundTruth gt{{{0, 0, 10, 10}}, {1}};
  const std::vector<GroundTruth> gts{gt};
  const Box hit{0, 0, 10, 10 * 0.6};  // IoU 0.6
  REQUIRE(iou(hit, gt.boxes[0]) == doctest::Approx(0.6));

  std::vector<DetectionSet> one{{{hit, 1, 0.9}}};
  CHECK(*voc_ap(one, gts, 1) == doctest::Approx(1.0));

  std::vector<DetectionSet> none{{}};
  CHECK(*voc_ap(none, gts, 1) == 0.0);

  std::vector<DetectionSet> dup{{{hit, 1, 0.9}, {gt.boxes[0], 1, 0.8}}};
  CHECK(*voc_ap(dup, gts, 1) == doctest::Approx(1.0));
  // The duplicate shows up as an FP once a second box must be recalled after it:
  // precision at full recall is 2/3.
  const std::vector<GroundTruth> two{{{{0, 0, 10, 10}, {20, 20, 30, 30}}, {1, 1}}};
  std::vector<DetectionSet> dup2{{{hit, 1, 0.9}, {gt.boxes[0], 1, 0.8}, {{20, 20, 30, 30}, 1, 0.7}}};
  CHECK(*voc_ap(dup2, two, 1) == doctest::Approx((6.0 + 5.0 * 2.0 / 3.0) / 11.0));
  std::vector<DetectionSet> fp_first{{{{20, 20, 30, 30}, 2, 0.95}, {{40, 40, 50, 50}, 1, 0.95}, {hit, 1, 0.9}}};
  CHECK(*voc_ap(fp_first, gts, 1) == doctest::Approx(0.5));

  // IoU exactly at threshold is not a hit.
  std::vector<DetectionSet> edge{{{{0, 0, 10, 5}, 1, 0.9}}};
  CHECK(*voc_ap(edge, gts, 1) == 0.0);

  CHECK_FALSE(voc_ap(one, gts, 2).has_value());
}

TEST_CASE("voc ap agrees with the exhaustive reference") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const Scene s = random_scene(rng, 4, 3);
    for (ClassId c = 1; c <= 3; ++c) {
      for (ApMethod m : {ApMethod::kElevenPoint, ApMethod::kArea}) {
        const auto ap = voc_ap(s.dets, s.gts, c, {0.5, m});
        std::size_t n = 0;
        for (const auto& g : s.gts) n += std::count(g.labels.begin(), g.labels.end(), c);
        if (n == 0) {
          CHECK_FALSE(ap.has_value());
          continue;
        }
        REQUIRE(ap.has_value());
        CHECK(*ap == doctest::Approx(ap_oracle(s.dets, s.gts, c, m)).epsilon(1e-12));
        CHECK(*ap >= 0.0);
        CHECK(*ap <= 1.0);
      }
    }
  }
}

TEST_CASE("voc ap monotonicity") {
  std::mt19937_64 rng(13);
  int removals = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Scene s = random_scene(rng, 3, 1);
    const auto base = voc_ap(s.dets, s.gts, 1);
    if (!base) continue;
    // Add a perfect top-scored detection on an unmatched-by-construction copy.
    for (std::size_t i = 0; i < s.gts.size(); ++i) {
      if (s.gts[i].size() == 0) continue;
      Scene more = s;
      GroundTruth& g = more.gts[i];
      const Box fresh{100 + 10.0 * trial, 100, 110 + 10.0 * trial, 110};
      g.boxes.push_back(fresh);
      g.labels.push_back(1);
      const double without = *voc_ap(more.dets, more.gts, 1);
      more.dets[i].push_back({fresh, 1, 2.0});
      CHECK(*voc_ap(more.dets, more.gts, 1) >= without);
      break;
    }
    // Removing a true positive never helps. A lower-scored duplicate that
    // inherits the box keeps the TP count, so those removals are skipped.
    for (std::size_t i = 0; i < s.dets.size(); ++i) {
      const std::vector<bool> tp = tp_flags(s.dets[i], s.gts[i], 1);
      const auto before = std::count(tp.begin(), tp.end(), true);
      for (std::size_t k = 0; k < s.dets[i].size(); ++k) {
        if (!tp[k]) continue;
        Scene fewer = s;
        fewer.dets[i].erase(fewer.dets[i].begin() + k);
        const std::vector<bool> after = tp_flags(fewer.dets[i], fewer.gts[i], 1);
        if (std::count(after.begin(), after.end(), true) != before - 1) continue;
        ++removals;
        CHECK(*voc_ap(fewer.dets, fewer.gts, 1) <= *base + 1e-12);
      }
    }
  }
  CHECK(removals > 50);
}

TEST_CASE("mean ap") {
  const std::vector<GroundTruth> gts{{{{0, 0, 10, 10}, {20, 20, 30, 30}}, {1, 2}}};
  // Class 1 perfect; class 2 found only after a false positive.
  const std::vector<DetectionSet> dets{
      {{{0, 0, 10, 10}, 1, 0.9}, {{50, 50, 60, 60}, 2, 0.95}, {{20, 20, 30, 30}, 2, 0.7}}};
  const MapResult r = mean_ap(dets, gts, 3);
  CHECK(r.per_class.size() == 2);
  CHECK(r.per_class.at(1) == doctest::Approx(100.0));
  CHECK(r.per_class.at(2) == doctest::Approx(50.0));
  CHECK(r.map == doctest::Approx(75.0));

  const MapResult single = mean_ap(dets, std::vector<GroundTruth>{{{{0, 0, 10, 10}}, {1}}}, 1);
  CHECK(single.map == single.per_class.at(1));
  CHECK_THROWS_AS(mean_ap(dets, std::vector<GroundTruth>{{}}, 2), std::invalid_argument);

  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const Scene s = random_scene(rng, 5, 3);
    double sum = 0;
    int n = 0;
    for (ClassId c = 1; c <= 3; ++c) {
      bool present = false;
      for (const auto& g : s.gts) present |= std::count(g.labels.begin(), g.labels.end(), c) > 0;
      if (!present) continue;
      sum += ap_oracle(s.dets, s.gts, c, ApMethod::kElevenPoint);
      ++n;
    }
    if (n == 0) continue;
    CHECK(mean_ap(s.dets, s.gts, 3).map == doctest::Approx(100.0 * sum / n).epsilon(1e-12));
  }
}

TEST_CASE("dataset evaluation") {
  det::DetectorConfig cfg = det::default_detector_config(2, 16);
  cfg.base_width = 3;
  det::DetectorModel detector = det::build_detector(cfg, 2);
  detector.freeze();
  std::vector<Sample> samples;
  for (int i = 0; i < 4; ++i) {
    samples.push_back({std::to_string(i), testing::random_image(3, 16, 16, 10 + i),
                       {{{1.0 + i, 2, 9, 10}}, {1 + i % 2}}});
  }
  const degradation::DegradationSpec spec{4, 0.0, 0.05, 7};
  EvalOptions opts;
  opts.detect.score_threshold = 0.0;

  const EvalRow hr = evaluate_dataset(Upscaler::hr(), detector, samples, spec, opts);
  CHECK(hr.method == "HR");
  CHECK(hr.psnr_mean == kPsnrCap);
  CHECK(hr.ssim_mean == doctest::Approx(1.0));
  std::vector<DetectionSet> dets;
  std::vector<GroundTruth> gts;
  for (const Sample& s : samples) {
    dets.push_back(det::detect(detector, s.image, opts.detect));
    gts.push_back(s.gt);
  }
  CHECK(hr.map == doctest::Approx(mean_ap(dets, gts, 2).map).epsilon(1e-12));

  const EvalRow bic = evaluate_dataset(Upscaler::bicubic(), detector, samples, spec, opts);
  double psnr_sum = 0;
  dets.clear();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto pair = degradation::make_pair(samples[i].image, samples[i].gt, sample_spec(spec, i));
    const Image up = degradation::resize_bicubic(pair.lr, 16, 16).clamped();
    psnr_sum += psnr(samples[i].image, up);
    dets.push_back(det::detect(detector, up, opts.detect));
  }
  CHECK(bic.psnr_mean == doctest::Approx(psnr_sum / 4).epsilon(1e-12));
  CHECK(bic.map == doctest::Approx(mean_ap(dets, gts, 2).map).epsilon(1e-12));
  CHECK(bic.psnr_mean < hr.psnr_mean);

  const EvalRow again = evaluate_dataset(Upscaler::bicubic(), detector, samples, spec, opts);
  CHECK(again.to_csv(2) == bic.to_csv(2));
  CHECK(again.psnr_mean == bic.psnr_mean);

  const auto pair = degradation::make_pair(samples[0].image, samples[0].gt, spec);
  const Image padded = upscale(Upscaler::lr_pad(), pair);
  CHECK(padded.height() == 16);
  CHECK(padded.at(0, 1, 1) == pair.lr.at(0, 1, 1));
  CHECK(padded.at(0, 15, 15) == 0.0);

  sr::SRModel model = sr::build_sr(4, 1, 2, 1);
  const EvalRow srow = evaluate_dataset(Upscaler::sr(model, "SR"), detector, samples, spec, opts);
  CHECK(srow.method == "SR");
  CHECK(std::isfinite(srow.psnr_mean));
  CHECK(EvalRow::csv_header(2) == "method,scale_factor,psnr,ssim,map,ap_1,ap_2");
  CHECK(srow.to_csv(2).starts_with("SR,4,"));
}

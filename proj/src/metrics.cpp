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

#include "tdsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tdsr/core/geometry.hpp"
#include "tdsr/core/rng.hpp"

namespace tdsr::metrics {

double psnr(const Image& x, const Image& x_hat, double max_val) {
  if (!x.same_shape(x_hat)) throw std::invalid_argument("psnr: shape mismatch");
  if (!(max_val > 0.0)) throw std::invalid_argument("psnr: max_val must be > 0");
  const auto a = x.data();
  const auto b = x_hat.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - std::clamp(b[i], 0.0, 1.0);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse));
}

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) throw std::invalid_argument("to_gray: expected 1 or 3 channels");
  Image g(1, img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      g.at(0, y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    }
  }
  return g;
}

double ssim(const Image& x, const Image& y) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (!x.same_shape(y)) throw std::invalid_argument("ssim: shape mismatch");
  if (x.height() < kWin || x.width() < kWin) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  const Image gx = to_gray(x);
  const Image gy = to_gray(y);

  double w[kWin][kWin];
  double wsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    for (int j = 0; j < kWin; ++j) {
      const double di = i - kWin / 2;
      const double dj = j - kWin / 2;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
      wsum += w[i][j];
    }
  }
  for (auto& row : w) {
    for (double& v : row) v /= wsum;
  }

  double total = 0.0;
  const int ny = x.height() - kWin + 1;
  const int nx = x.width() - kWin + 1;
  for (int oy = 0; oy < ny; ++oy) {
    for (int ox = 0; ox < nx; ++ox) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
          const double a = gx.at(0, oy + i, ox + j);
          const double b = gy.at(0, oy + i, ox + j);
          mx += w[i][j] * a;
          my += w[i][j] * b;
          sxx += w[i][j] * a * a;
          syy += w[i][j] * b * b;
          sxy += w[i][j] * a * b;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cxy = sxy - mx * my;
      total += ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
    }
  }
  return total / (static_cast<double>(ny) * nx);
}

std::optional<double> voc_ap(std::span<const DetectionSet> dets,
                             std::span<const GroundTruth> gts, ClassId cls,
                             const ApOptions& options) {
  if (dets.size() != gts.size()) {
    throw std::invalid_argument("voc_ap: detections and ground truth cover different images");
  }
  std::size_t num_gt = 0;
  std::vector<std::vector<bool>> claimed(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    claimed[i].assign(gts[i].size(), false);
    num_gt += std::count(gts[i].labels.begin(), gts[i].labels.end(), cls);
  }
  if (num_gt == 0) return std::nullopt;

  struct Ranked {
    double score;
    std::size_t image;
    const Box* box;
  };
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (const Detection& d : dets[i]) {
      if (d.label == cls) ranked.push_back({d.score, i, &d.box});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const Ranked& r : ranked) {
    const GroundTruth& gt = gts[r.image];
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt.labels[j] != cls) continue;
      const double o = iou(*r.box, gt.boxes[j]);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    if (best > options.iou_threshold && !claimed[r.image][best_j]) {
      claimed[r.image][best_j] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }

  if (options.method == ApMethod::kElevenPoint) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double level = t / 10.0;
      double p = 0.0;
      for (std::size_t k = 0; k < recall.size(); ++k) {
        if (recall[k] >= level) p = std::max(p, precision[k]);
      }
      ap += p;
    }
    return ap / 11.0;
  }
  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t k = mpre.size() - 1; k > 0; --k) mpre[k - 1] = std::max(mpre[k - 1], mpre[k]);
  double ap = 0.0;
  for (std::size_t k = 1; k < mrec.size(); ++k) ap += (mrec[k] - mrec[k - 1]) * mpre[k];
  return ap;
}

MapResult mean_ap(std::span<const DetectionSet> dets, std::span<const GroundTruth> gts,
                  int num_classes, const ApOptions& options) {
  MapResult out;
  double sum = 0.0;
  for (ClassId c = 1; c <= num_classes; ++c) {
    if (auto ap = voc_ap(dets, gts, c, options)) {
      out.per_class[c] = 100.0 * *ap;
      sum += *ap;
    }
  }
  if (out.per_class.empty()) throw std::invalid_argument("mean_ap: no ground-truth boxes");
  out.map = 100.0 * sum / static_cast<double>(out.per_class.size());
  return out;
}

Image upscale(const Upscaler& up, const degradation::DegradedPair& pair) {
  const int h = pair.target_hr.height();
  const int w = pair.target_hr.width();
  switch (up.method) {
    case UpscaleMethod::kHr:
      return pair.target_hr;
    case UpscaleMethod::kBicubic:
      return degradation::resize_bicubic(pair.lr, h, w).clamped();
    case UpscaleMethod::kLrPad:
      return degradation::pad_to(pair.lr, h, w);
    case UpscaleMethod::kSr:
      if (up.model == nullptr) throw std::invalid_argument("upscale: SR method without a model");
      return sr::sr_forward(*up.model, pair.lr).clamped();
  }
  throw std::invalid_argument("upscale: unknown method");
}

degradation::DegradationSpec sample_spec(const degradation::DegradationSpec& spec,
                                         std::size_t index) {
  degradation::DegradationSpec s = spec;
  s.seed = derive_seed(spec.seed, {0x45564131ULL, index});
  return s;
}

EvalRow evaluate_dataset(const Upscaler& up, const det::DetectorModel& det,
                         std::span<const Sample> samples,
                         const degradation::DegradationSpec& spec,
                         const EvalOptions& options) {
  spec.validate();
  if (samples.empty()) throw std::invalid_argument("evaluate_dataset: empty dataset");
  EvalRow row;
  row.method = up.label;
  row.scale_factor = spec.scale_factor;
  std::vector<DetectionSet> dets;
  std::vector<GroundTruth> gts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto pair = degradation::make_pair(samples[i].image, samples[i].gt, sample_spec(spec, i));
    const Image input = upscale(up, pair);
    row.psnr_mean += psnr(pair.target_hr, input);
    row.ssim_mean += ssim(pair.target_hr, input);
    dets.push_back(det::detect(det, input, options.detect));
    gts.push_back(pair.gt);
  }
  row.psnr_mean /= static_cast<double>(samples.size());
  row.ssim_mean /= static_cast<double>(samples.size());
  MapResult m = mean_ap(dets, gts, det.num_classes(), options.ap);
  row.map = m.map;
  row.per_class_ap = std::move(m.per_class);
  return row;
}

std::string EvalRow::csv_header(int num_classes) {
  std::string h = "method,scale_factor,psnr,ssim,map";
  for (int c = 1; c <= num_classes; ++c) h += ",ap_" + std::to_string(c);
  return h;
}

std::string EvalRow::to_csv(int num_classes) const {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string line = method + "," + std::to_string(scale_factor) + "," + fmt(psnr_mean) + "," +
                     fmt(ssim_mean) + "," + fmt(map);
  for (int c = 1; c <= num_classes; ++c) {
    auto it = per_class_ap.find(c);
    line += ",";
    if (it != per_class_ap.end()) line += fmt(it->second);
  }
  return line;
}

}  // namespace tdsr::metrics

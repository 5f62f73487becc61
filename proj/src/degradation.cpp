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

#include "tdsr/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace tdsr::degradation {

void DegradationSpec::validate() const {
  if (scale_factor != 2 && scale_factor != 4 && scale_factor != 8) {
    throw std::invalid_argument("DegradationSpec: scale_factor must be 2, 4 or 8, got " +
                                std::to_string(scale_factor));
  }
  if (!std::isfinite(blur_sigma) || blur_sigma < 0.0) {
    throw std::invalid_argument("DegradationSpec: blur_sigma must be finite and >= 0");
  }
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
    throw std::invalid_argument("DegradationSpec: noise_sigma must be finite and >= 0");
  }
}

double keys_cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace {

struct Taps {
  int first = 0;
  std::vector<double> weights;
};

// Per-output-index tap tables for one axis.
std::vector<Taps> resample_taps(int in, int out) {
  const double scale = static_cast<double>(in) / out;
  const double stretch = std::max(scale, 1.0);
  const double support = 2.0 * stretch;
  std::vector<Taps> taps(out);
  for (int i = 0; i < out; ++i) {
    const double center = (i + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - support)) + 1;
    const int hi = static_cast<int>(std::ceil(center + support)) - 1;
    Taps& t = taps[i];
    t.first = lo;
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double w = keys_cubic((j - center) / stretch);
      t.weights.push_back(w);
      sum += w;
    }
    for (double& w : t.weights) w /= sum;
  }
  return taps;
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Image resize_bicubic(const Image& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw std::invalid_argument("resize_bicubic: output size must be positive");
  }
  const int c = img.channels();
  const int h = img.height();
  const int w = img.width();
  const auto xtaps = resample_taps(w, out_width);
  const auto ytaps = resample_taps(h, out_height);

  Image horiz(c, h, out_width);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < out_width; ++x) {
        const Taps& t = xtaps[x];
        double s = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          s += t.weights[k] * img.at(ch, y, clamp_index(t.first + static_cast<int>(k), w));
        }
        horiz.at(ch, y, x) = s;
      }
    }
  }
  Image out(c, out_height, out_width);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < out_height; ++y) {
      const Taps& t = ytaps[y];
      for (int x = 0; x < out_width; ++x) {
        double s = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          s += t.weights[k] * horiz.at(ch, clamp_index(t.first + static_cast<int>(k), h), x);
        }
        out.at(ch, y, x) = s;
      }
    }
  }
  return out;
}

Image downscale_bicubic(const Image& img, int factor) {
  if (factor < 1) throw std::invalid_argument("downscale_bicubic: factor must be >= 1");
  if (img.height() % factor != 0 || img.width() % factor != 0) {
    throw std::invalid_argument(
        "downscale_bicubic: " + std::to_string(img.height()) + "x" +
        std::to_string(img.width()) + " is not divisible by " +
        std::to_string(factor) + "; crop_to_multiple first");
  }
  return resize_bicubic(img, img.height() / factor, img.width() / factor).clamp01();
}

Image upscale_bicubic(const Image& img, int factor) {
  if (factor < 1) throw std::invalid_argument("upscale_bicubic: factor must be >= 1");
  return resize_bicubic(img, img.height() * factor, img.width() * factor).clamp01();
}

CropWindow crop_window(int height, int width, int factor) {
  if (factor < 1) throw std::invalid_argument("crop_window: factor must be >= 1");
  if (height < factor || width < factor) {
    throw std::invalid_argument("crop_to_multiple: image " + std::to_string(height) +
                                "x" + std::to_string(width) +
                                " is smaller than factor " + std::to_string(factor));
  }
  const int ch = height / factor * factor;
  const int cw = width / factor * factor;
  return {(width - cw) / 2, (height - ch) / 2, cw, ch};
}

Image crop(const Image& img, const CropWindow& win) {
  if (win.x0 < 0 || win.y0 < 0 || win.x0 + win.width > img.width() ||
      win.y0 + win.height > img.height()) {
    throw std::invalid_argument("crop: window outside image");
  }
  Image out(img.channels(), win.height, win.width);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < win.height; ++y) {
      for (int x = 0; x < win.width; ++x) {
        out.at(c, y, x) = img.at(c, y + win.y0, x + win.x0);
      }
    }
  }
  return out;
}

Image crop_to_multiple(const Image& img, int factor) {
  return crop(img, crop_window(img.height(), img.width(), factor));
}

GroundTruth shift_and_clip(const GroundTruth& gt, const CropWindow& win,
                           double min_extent) {
  GroundTruth out;
  for (std::size_t i = 0; i < gt.boxes.size(); ++i) {
    const Box& b = gt.boxes[i];
    Box s{std::clamp(b.xmin - win.x0, 0.0, static_cast<double>(win.width)),
          std::clamp(b.ymin - win.y0, 0.0, static_cast<double>(win.height)),
          std::clamp(b.xmax - win.x0, 0.0, static_cast<double>(win.width)),
          std::clamp(b.ymax - win.y0, 0.0, static_cast<double>(win.height))};
    if (s.width() < min_extent || s.height() < min_extent) continue;
    out.boxes.push_back(s);
    out.labels.push_back(gt.labels.at(i));
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian_kernel: sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  if (k.size() == 1) return img;
  const int r = static_cast<int>(k.size() / 2);
  const int h = img.height();
  const int w = img.width();
  Image tmp(img.channels(), h, w);
  Image out(img.channels(), h, w);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * img.at(c, y, reflect_index(x + i, w));
        tmp.at(c, y, x) = s;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(c, reflect_index(y + i, h), x);
        out.at(c, y, x) = s;
      }
    }
  }
  return out;
}

Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("add_gaussian_noise: sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  Image out = img;
  for (double& v : out.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return out;
}

Image pad_to(const Image& img, int height, int width) {
  if (img.height() > height || img.width() > width) {
    throw std::invalid_argument("pad_to: image larger than canvas");
  }
  Image out(img.channels(), height, width, 0.0);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = img.at(c, y, x);
    }
  }
  return out;
}

DegradedPair make_pair(const Image& hr, const GroundTruth& gt,
                       const DegradationSpec& spec) {
  spec.validate();
  const CropWindow win = crop_window(hr.height(), hr.width(), spec.scale_factor);
  DegradedPair pair;
  pair.target_hr = crop(hr, win);
  pair.gt = shift_and_clip(gt, win);
  pair.degraded_hr = pair.target_hr;
  if (spec.blur_sigma > 0.0) {
    pair.degraded_hr = gaussian_blur(pair.degraded_hr, spec.blur_sigma);
  }
  if (spec.noise_sigma > 0.0) {
    pair.degraded_hr = add_gaussian_noise(pair.degraded_hr, spec.noise_sigma, spec.seed);
  }
  pair.lr = downscale_bicubic(pair.degraded_hr, spec.scale_factor);
  return pair;
}

}  // namespace tdsr::degradation

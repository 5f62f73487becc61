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

#include <cstdint>
#include <vector>

#include "tdsr/core/types.hpp"

namespace tdsr::degradation {

/// How an HR image is turned into the LR network input.
struct DegradationSpec {
  int scale_factor = 4;      // 2, 4 or 8
  double blur_sigma = 0.0;   // 0 disables blur
  double noise_sigma = 0.0;  // 0 disables noise
  std::uint64_t seed = 0;    // noise seed

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

/// Keys cubic convolution kernel (a = -0.5).
double keys_cubic(double x);

/// Separable bicubic resampling. When shrinking, the kernel is stretched by
/// the scale ratio (anti-aliased); edges replicate. Output is not clamped.
Image resize_bicubic(const Image& img, int out_height, int out_width);

/// Bicubic downscaling by an integer factor, clamped to [0,1].
/// Dimensions must be divisible by factor.
Image downscale_bicubic(const Image& img, int factor);

/// Bicubic enlargement by an integer factor, clamped to [0,1].
Image upscale_bicubic(const Image& img, int factor);

/// Center crop rectangle used by crop_to_multiple.
struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// Largest centered window whose sides are multiples of factor.
CropWindow crop_window(int height, int width, int factor);

Image crop(const Image& img, const CropWindow& window);

/// Center crop to the largest dimensions divisible by factor.
Image crop_to_multiple(const Image& img, int factor);

/// Translate boxes into the crop frame and clip them to it. Boxes whose
/// clipped width or height falls below min_extent are dropped.
GroundTruth shift_and_clip(const GroundTruth& gt, const CropWindow& window,
                           double min_extent = 1.0);

/// Normalised sampled Gaussian, radius ceil(3 * sigma). sigma 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with reflect padding.
Image gaussian_blur(const Image& img, double sigma);

/// Adds i.i.d. N(0, sigma^2) per entry, then clamps to [0,1].
Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed);

/// Zero-pad an image at the top-left of a black canvas.
Image pad_to(const Image& img, int height, int width);

struct DegradedPair {
  Image lr;           // network input
  Image target_hr;    // clean cropped HR, the reconstruction target
  Image degraded_hr;  // cropped HR after blur/noise, before downscaling
  GroundTruth gt;     // boxes in the cropped frame
};

/// crop -> (blur) -> (noise) -> bicubic downscale. The reconstruction
/// target never sees blur or noise.
DegradedPair make_pair(const Image& hr, const GroundTruth& gt,
                       const DegradationSpec& spec);

}  // namespace tdsr::degradation

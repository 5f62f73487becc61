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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdsr/core/types.hpp"
#include "tdsr/degradation.hpp"
#include "tdsr/detector.hpp"
#include "tdsr/sr_network.hpp"

namespace tdsr::metrics {

/// Reported for identical images (and any MSE that would exceed it).
inline constexpr double kPsnrCap = 100.0;

/// PSNR in dB over all channels. x_hat is clamped to [0,1] first.
double psnr(const Image& x, const Image& x_hat, double max_val = 1.0);

/// Luma with weights 0.299/0.587/0.114; single-channel images pass through.
Image to_gray(const Image& img);

/// Mean SSIM over all fully contained 11x11 Gaussian (sigma 1.5) windows of
/// the grayscale images, with K1 = 0.01 and K2 = 0.03 on a unit range.
double ssim(const Image& x, const Image& y);

enum class ApMethod {
  kElevenPoint,  // VOC2007
  kArea,         // area under the monotone precision envelope
};

struct ApOptions {
  double iou_threshold = 0.5;
  ApMethod method = ApMethod::kElevenPoint;
};

/// Average precision in [0,1] for one class over a set of images. Returns
/// nullopt when the class has no ground-truth instance.
std::optional<double> voc_ap(std::span<const DetectionSet> dets,
                             std::span<const GroundTruth> gts, ClassId cls,
                             const ApOptions& options = {});

struct MapResult {
  double map = 0.0;                   // percent
  std::map<ClassId, double> per_class;  // percent, classes with >= 1 instance
};

/// Mean AP over classes 1..num_classes that have ground truth. Throws
/// std::invalid_argument when no image has any box.
MapResult mean_ap(std::span<const DetectionSet> dets, std::span<const GroundTruth> gts,
                  int num_classes, const ApOptions& options = {});

enum class UpscaleMethod {
  kHr,       // clean HR, the detector ceiling
  kBicubic,  // bicubic enlargement of the LR input
  kLrPad,    // LR input on a black canvas of HR size
  kSr,       // super-resolution model
};

struct Upscaler {
  UpscaleMethod method = UpscaleMethod::kBicubic;
  const sr::SRModel* model = nullptr;  // required for kSr
  std::string label;

  static Upscaler hr() { return {UpscaleMethod::kHr, nullptr, "HR"}; }
  static Upscaler bicubic() { return {UpscaleMethod::kBicubic, nullptr, "Bicubic"}; }
  static Upscaler lr_pad() { return {UpscaleMethod::kLrPad, nullptr, "LR"}; }
  static Upscaler sr(const sr::SRModel& m, std::string label) {
    return {UpscaleMethod::kSr, &m, std::move(label)};
  }
};

/// Detector input produced by an upscaler from one degraded pair; clamped
/// to [0,1].
Image upscale(const Upscaler& up, const degradation::DegradedPair& pair);

struct EvalOptions {
  det::DetectParams detect{0.01, 0.45, 200};
  ApOptions ap;
};

struct EvalRow {
  std::string method;
  int scale_factor = 4;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  double map = 0.0;                        // percent
  std::map<ClassId, double> per_class_ap;  // percent

  /// "method,scale_factor,psnr,ssim,map,ap_1,...,ap_C".
  static std::string csv_header(int num_classes);
  std::string to_csv(int num_classes) const;
};

/// Degrade every sample (noise seeded per sample from spec.seed), upscale,
/// detect, and aggregate PSNR/SSIM against the clean HR and mAP.
EvalRow evaluate_dataset(const Upscaler& up, const det::DetectorModel& det,
                         std::span<const Sample> samples,
                         const degradation::DegradationSpec& spec,
                         const EvalOptions& options = {});

/// The per-sample degradation spec used by evaluate_dataset.
degradation::DegradationSpec sample_spec(const degradation::DegradationSpec& spec,
                                         std::size_t index);

}  // namespace tdsr::metrics

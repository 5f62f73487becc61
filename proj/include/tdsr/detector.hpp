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

#include "tdsr/core/geometry.hpp"
#include "tdsr/core/types.hpp"
#include "tdsr/nn/parameters.hpp"
#include "tdsr/nn/tape.hpp"

namespace tdsr::det {

/// One detection feature map: a grid x grid layout of cells, each carrying
/// scales.size() * ratios.size() anchors. Scales are fractions of the image
/// side.
struct FeatureMapSpec {
  int grid = 1;
  std::vector<double> scales{1.0};
  std::vector<double> ratios{1.0};

  int anchors_per_cell() const {
    return static_cast<int>(scales.size() * ratios.size());
  }
  bool operator==(const FeatureMapSpec&) const = default;
};

struct AnchorProvenance {
  int map = 0;
  int cell_y = 0;
  int cell_x = 0;
  int scale = 0;
  int ratio = 0;
};

/// Anchors in input-image coordinates, ordered by (map, y, x, scale, ratio).
struct AnchorSet {
  std::vector<Box> anchors;
  std::vector<AnchorProvenance> provenance;

  std::size_t size() const { return anchors.size(); }
};

AnchorSet generate_anchors(const std::vector<FeatureMapSpec>& specs, int image_size);

struct DetectorConfig {
  /// Object classes C; the network predicts C + 1 labels including background.
  int num_classes = 4;
  int input_size = 64;
  int channels = 3;
  /// Width of the first backbone block; doubled per block up to 4x.
  int base_width = 16;
  double slope = 0.1;
  std::vector<FeatureMapSpec> maps;
  Variances variances;

  int num_labels() const { return num_classes + 1; }
  /// Number of stride-2 backbone blocks; the last map sits on the last block.
  int num_blocks() const;
  void validate() const;
  bool operator==(const DetectorConfig&) const = default;
};

/// Default two-map layout for a square input: grids input/8 and input/16.
DetectorConfig default_detector_config(int num_classes, int input_size);

class DetectorModel {
 public:
  DetectorModel(DetectorConfig config, nn::ParameterStore params);

  const DetectorConfig& config() const { return config_; }
  const AnchorSet& anchors() const { return anchors_; }
  int num_classes() const { return config_.num_classes; }
  int input_size() const { return config_.input_size; }

  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

 private:
  DetectorConfig config_;
  AnchorSet anchors_;
  nn::ParameterStore params_;
  bool frozen_ = false;
};

DetectorModel build_detector(const DetectorConfig& config, std::uint64_t seed);
DetectorModel build_detector(int num_classes, const std::vector<FeatureMapSpec>& maps,
                             std::uint64_t seed, int input_size);

/// Per-anchor predictions: logits (A, C+1) and offsets (A, 4).
struct DetectorHeads {
  nn::Var class_logits;
  nn::Var offsets;
  /// Raw per-map head tensors (A_m * (C+5), grid, grid).
  std::vector<nn::Var> maps;
};

/// Records the detector on a tape. Frozen or non-trainable models enter as
/// constants, so only the data gradient flows through them.
DetectorHeads detector_forward(nn::Tape& tape, DetectorModel& model, nn::Var image,
                               bool trainable);

struct Match {
  int anchor = 0;
  int gt = 0;
  ClassId label = 1;
  BoxOffsets target;
};

struct MatchResult {
  std::vector<Match> matched;  // sorted by anchor index
  std::vector<int> negatives;  // every unmatched anchor, ascending
  int num_matched() const { return static_cast<int>(matched.size()); }
};

/// Bipartite step (each gt greedily claims its best remaining anchor by
/// global max IoU) followed by threshold step (every other anchor with
/// IoU > iou_threshold to some gt takes its best gt).
MatchResult match_anchors(const AnchorSet& anchors, const GroundTruth& gt,
                          double iou_threshold = 0.5, Variances variances = {});

/// Loss value with its gradient w.r.t. the tensor it was computed from.
struct LossWithGrad {
  double value = 0.0;
  nn::Tensor grad;
};

struct ConfidenceLoss : LossWithGrad {
  std::vector<int> mined_negatives;
};

/// Summed softmax cross-entropy over positives plus hard-mined negatives
/// (at most floor(ratio * B), highest background loss first).
ConfidenceLoss confidence_loss(const nn::Tensor& class_logits, const MatchResult& match,
                               double hard_negative_ratio = 3.0);

double smooth_l1(double d);

/// Summed smooth-L1 over the 4 offsets of every matched anchor.
LossWithGrad localization_loss(const nn::Tensor& offsets, const MatchResult& match);

struct LossConfig {
  double lambda = 1.0;
  double hard_negative_ratio = 3.0;
  double match_iou = 0.5;
};

struct DetectionLoss {
  double task = 0.0;        // (conf + lambda * loc) / B
  double confidence = 0.0;  // unnormalised
  double localization = 0.0;
  int num_matched = 0;
  bool skipped = false;  // B == 0
  nn::Tensor grad_logits;
  nn::Tensor grad_offsets;
};

DetectionLoss detection_loss(const nn::Tensor& class_logits, const nn::Tensor& offsets,
                             const AnchorSet& anchors, const GroundTruth& gt,
                             const LossConfig& config = {}, Variances variances = {});

struct DetectParams {
  double score_threshold = 0.5;
  double nms_iou = 0.45;
  int top_k = 200;
};

/// Softmax, per-class thresholding, offset decoding (clipped to the image)
/// and per-class NMS. Sorted by descending score.
DetectionSet decode_detections(const AnchorSet& anchors, const nn::Tensor& class_logits,
                               const nn::Tensor& offsets, int image_size,
                               const DetectParams& params = {}, Variances variances = {});

/// Full inference. Throws std::invalid_argument for a wrong input size.
DetectionSet detect(const DetectorModel& model, const Image& img,
                    const DetectParams& params = {});

/// Network outputs for one image without a gradient.
struct DetectorOutput {
  nn::Tensor class_logits;
  nn::Tensor offsets;
};
DetectorOutput detector_outputs(const DetectorModel& model, const Image& img);

}  // namespace tdsr::det

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
#include <filesystem>
#include <string>
#include <vector>

#include "tdsr/core/types.hpp"

namespace tdsr::data {

/// Shape categories in class-id order (class 1 is the first entry).
const std::vector<std::string>& shape_names();

struct SceneSpec {
  int image_size = 128;
  int min_objects = 1;
  int max_objects = 4;
  /// 2..shape_names().size()
  int num_classes = 4;
  /// Object side length as a fraction of the image side.
  double min_extent = 0.12;
  double max_extent = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RenderedScene {
  Image image;
  GroundTruth gt;
  /// Per-object coverage in [0,1], image_size^2 row-major, same order as gt.
  std::vector<std::vector<double>> masks;
};

/// Renders scene `index` of the corpus defined by spec. Shapes are
/// anti-aliased by 4x4 supersampling and kept inside the image; boxes are the
/// exact geometric extents.
RenderedScene render_scene(const SceneSpec& spec, std::uint64_t index);

/// Writes images/NNNNNN.png, manifest.jsonl and meta.json under out_dir and
/// returns the manifest path.
std::filesystem::path generate_synthetic_dataset(const SceneSpec& spec, int n,
                                                 const std::filesystem::path& out_dir);

}  // namespace tdsr::data

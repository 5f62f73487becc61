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

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdsr/core/types.hpp"

namespace tdsr::data {

/// Sidecar meta.json next to a manifest.
struct DatasetMeta {
  int num_classes = 0;
  int image_size = 0;  // 0 when images vary in size
  std::vector<std::string> class_names;
};

struct DatasetRecord {
  std::filesystem::path image;  // resolved against the manifest directory
  GroundTruth gt;
  int line = 0;
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::filesystem::path& file, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

/// JSON-lines annotations, one object per line:
/// {"image": "relpath", "boxes": [[xmin,ymin,xmax,ymax],...], "labels": [int,...]}.
/// Records are validated on load; images are decoded on demand.
class Dataset {
 public:
  Dataset(std::filesystem::path manifest, DatasetMeta meta, std::vector<DatasetRecord> records);

  const std::filesystem::path& manifest() const { return manifest_; }
  const DatasetMeta& meta() const { return meta_; }
  int num_classes() const { return meta_.num_classes; }
  std::size_t size() const { return records_.size(); }
  const DatasetRecord& record(std::size_t i) const { return records_.at(i); }

  /// Decodes image i. Throws DatasetError if a box leaves the image.
  Sample sample(std::size_t i) const;
  /// Every sample, in manifest order.
  std::vector<Sample> load_all() const;

 private:
  std::filesystem::path manifest_;
  DatasetMeta meta_;
  std::vector<DatasetRecord> records_;
};

/// Parses the manifest and its meta.json. Malformed records raise
/// DatasetError carrying the 1-based line number.
Dataset load_dataset(const std::filesystem::path& manifest);

DatasetMeta read_meta(const std::filesystem::path& meta_json);
void write_meta(const std::filesystem::path& meta_json, const DatasetMeta& meta);

/// One manifest line (no trailing newline).
std::string manifest_line(const std::string& image, const GroundTruth& gt);

}  // namespace tdsr::data

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

#include "tdsr/data/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "tdsr/data/image_io.hpp"

namespace tdsr::data {

using nlohmann::json;

DatasetError::DatasetError(const std::filesystem::path& file, int line, const std::string& what)
    : std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + what), line_(line) {}

Dataset::Dataset(std::filesystem::path manifest, DatasetMeta meta,
                 std::vector<DatasetRecord> records)
    : manifest_(std::move(manifest)), meta_(std::move(meta)), records_(std::move(records)) {}

Sample Dataset::sample(std::size_t i) const {
  const DatasetRecord& r = records_.at(i);
  Image img = read_image(r.image);
  for (const Box& b : r.gt.boxes) {
    if (b.xmin < 0.0 || b.ymin < 0.0 || b.xmax > img.width() || b.ymax > img.height()) {
      throw DatasetError(manifest_, r.line, "box outside the " + std::to_string(img.width()) +
                                                "x" + std::to_string(img.height()) + " image");
    }
  }
  return {r.image.filename().string(), std::move(img), r.gt};
}

std::vector<Sample> Dataset::load_all() const {
  std::vector<Sample> out;
  out.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) out.push_back(sample(i));
  return out;
}

DatasetMeta read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  DatasetMeta meta;
  try {
    const json j = json::parse(in);
    meta.num_classes = j.at("num_classes").get<int>();
    meta.image_size = j.value("image_size", 0);
    meta.class_names = j.value("class_names", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (meta.num_classes < 1) throw std::runtime_error(path.string() + ": num_classes must be >= 1");
  return meta;
}

void write_meta(const std::filesystem::path& path, const DatasetMeta& meta) {
  const json j{{"num_classes", meta.num_classes},
               {"image_size", meta.image_size},
               {"class_names", meta.class_names}};
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string manifest_line(const std::string& image, const GroundTruth& gt) {
  json boxes = json::array();
  for (const Box& b : gt.boxes) boxes.push_back({b.xmin, b.ymin, b.xmax, b.ymax});
  return json{{"image", image}, {"boxes", boxes}, {"labels", gt.labels}}.dump();
}

namespace {

DatasetRecord parse_record(const std::string& text, const std::filesystem::path& manifest,
                           int line, int num_classes) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DatasetError(manifest, line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DatasetError(manifest, line, "record is not an object");
  for (const char* key : {"image", "boxes", "labels"}) {
    if (!j.contains(key)) throw DatasetError(manifest, line, std::string("missing \"") + key + "\"");
  }
  DatasetRecord r;
  r.line = line;
  try {
    r.image = manifest.parent_path() / j.at("image").get<std::string>();
    for (const json& b : j.at("boxes")) {
      if (!b.is_array() || b.size() != 4) {
        throw DatasetError(manifest, line, "each box must be [xmin, ymin, xmax, ymax]");
      }
      r.gt.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                            b[3].get<double>()});
    }
    for (const json& l : j.at("labels")) {
      if (!l.is_number_integer()) throw DatasetError(manifest, line, "labels must be integers");
      r.gt.labels.push_back(l.get<ClassId>());
    }
  } catch (const json::exception& e) {
    throw DatasetError(manifest, line, e.what());
  }
  try {
    r.gt.validate(num_classes);
  } catch (const std::invalid_argument& e) {
    throw DatasetError(manifest, line, e.what());
  }
  return r;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
  DatasetMeta meta = read_meta(manifest.parent_path() / "meta.json");
  std::vector<DatasetRecord> records;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_record(text, manifest, line, meta.num_classes));
  }
  return Dataset(manifest, std::move(meta), std::move(records));
}

}  // namespace tdsr::data

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

#include "tdsr/data/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace tdsr::data {

cv::Mat to_mat(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw std::invalid_argument("to_mat: expected 1 or 3 channels");
  }
  const bool color = img.channels() == 3;
  cv::Mat mat(img.height(), img.width(), color ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        // OpenCV stores BGR.
        const int dst = color ? 2 - c : 0;
        row[x * img.channels() + dst] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return mat;
}

Image from_mat(const cv::Mat& mat) {
  cv::Mat bgr;
  if (mat.type() == CV_8UC3) {
    bgr = mat;
  } else if (mat.type() == CV_8UC1) {
    cv::cvtColor(mat, bgr, cv::COLOR_GRAY2BGR);
  } else if (mat.type() == CV_8UC4) {
    cv::cvtColor(mat, bgr, cv::COLOR_BGRA2BGR);
  } else {
    throw std::invalid_argument("from_mat: unsupported pixel type");
  }
  Image img(3, bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[x * 3 + 2 - c] / 255.0;
    }
  }
  return img;
}

Image read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw std::runtime_error("cannot read image " + path.string());
  if (mat.depth() != CV_8U) throw std::runtime_error("not an 8-bit image: " + path.string());
  return from_mat(mat);
}

void write_image(const std::filesystem::path& path, const Image& img) {
  if (!cv::imwrite(path.string(), to_mat(img))) {
    throw std::runtime_error("cannot write image " + path.string());
  }
}

}  // namespace tdsr::data

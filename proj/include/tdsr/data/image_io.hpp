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

#include <opencv2/core.hpp>

#include "tdsr/core/types.hpp"

namespace tdsr::data {

/// Reads an 8-bit image as RGB (grayscale files are expanded to 3 channels).
/// Throws std::runtime_error when the file cannot be decoded.
Image read_image(const std::filesystem::path& path);

/// Writes an RGB or grayscale image, clamped and rounded to 8 bits.
void write_image(const std::filesystem::path& path, const Image& img);

/// 8-bit BGR matrix for drawing, and back.
cv::Mat to_mat(const Image& img);
Image from_mat(const cv::Mat& mat);

}  // namespace tdsr::data

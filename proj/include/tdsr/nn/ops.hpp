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

#include <span>

#include "tdsr/nn/tape.hpp"

namespace tdsr::nn {

/// Output spatial size of a strided convolution.
int conv_out_size(int in, int kernel, int stride, int pad);
/// Output spatial size of a transposed convolution.
int conv_transpose_out_size(int in, int kernel, int stride, int pad);

/// 2-D convolution. x: (Cin, H, W); w: (Cout, Cin, k, k); b: (Cout) or
/// undefined for no bias.
Var conv2d(Tape& tape, Var x, Var w, Var b, int stride, int pad);

/// 2-D transposed convolution (the data-gradient of conv2d).
/// x: (Cin, H, W); w: (Cin, Cout, k, k); b: (Cout) or undefined.
Var conv_transpose2d(Tape& tape, Var x, Var w, Var b, int stride, int pad);

/// max(x, 0) + slope * min(x, 0).
Var leaky_relu(Tape& tape, Var x, double slope);

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);

/// Concatenate (C_i, H, W) tensors along the channel axis.
Var concat_channels(Tape& tape, std::span<const Var> parts);

}  // namespace tdsr::nn

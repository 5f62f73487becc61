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

#include "tdsr/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>

namespace tdsr::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

struct ConvGeom {
  int channels;
  int in_h, in_w;
  int kernel, stride, pad;
  int out_h, out_w;
};

// Valid output range [lo, hi) along one axis for kernel tap `tap`, i.e.
// the outputs whose source index o * stride - pad + tap lies in [0, in).
inline void valid_range(int tap, const int in, int out, int stride, int pad,
                        int& lo, int& hi) {
  const int shift = tap - pad;
  lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  const int last = in - 1 - shift;
  hi = last < 0 ? 0 : std::min(out, last / stride + 1);
  if (hi < lo) hi = lo;
}

// col: (channels * k * k) x (out_h * out_w)
void im2col(const double* in, const ConvGeom& g, double* col) {
  const int k = g.kernel;
  const int cols = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = in + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      int y_lo, y_hi;
      valid_range(ky, g.in_h, g.out_h, g.stride, g.pad, y_lo, y_hi);
      for (int kx = 0; kx < k; ++kx) {
        int x_lo, x_hi;
        valid_range(kx, g.in_w, g.out_w, g.stride, g.pad, x_lo, x_hi);
        double* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * cols;
        std::fill(row, row + static_cast<std::size_t>(y_lo) * g.out_w, 0.0);
        for (int oy = y_lo; oy < y_hi; ++oy) {
          double* dst = row + oy * g.out_w;
          const double* src =
              plane + (oy * g.stride - g.pad + ky) * g.in_w + (kx - g.pad);
          std::fill(dst, dst + x_lo, 0.0);
          if (g.stride == 1) {
            std::copy(src + x_lo, src + x_hi, dst + x_lo);
          } else {
            for (int ox = x_lo; ox < x_hi; ++ox) dst[ox] = src[ox * g.stride];
          }
          std::fill(dst + x_hi, dst + g.out_w, 0.0);
        }
        std::fill(row + static_cast<std::size_t>(y_hi) * g.out_w, row + cols, 0.0);
      }
    }
  }
}

// Adds col entries back onto the (channels, in_h, in_w) image.
void col2im(const double* col, const ConvGeom& g, double* out) {
  const int k = g.kernel;
  const int cols = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    double* plane = out + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      int y_lo, y_hi;
      valid_range(ky, g.in_h, g.out_h, g.stride, g.pad, y_lo, y_hi);
      for (int kx = 0; kx < k; ++kx) {
        int x_lo, x_hi;
        valid_range(kx, g.in_w, g.out_w, g.stride, g.pad, x_lo, x_hi);
        const double* row =
            col + static_cast<std::size_t>((c * k + ky) * k + kx) * cols;
        for (int oy = y_lo; oy < y_hi; ++oy) {
          const double* src = row + oy * g.out_w;
          double* dst = plane + (oy * g.stride - g.pad + ky) * g.in_w + (kx - g.pad);
          for (int ox = x_lo; ox < x_hi; ++ox) dst[ox * g.stride] += src[ox];
        }
      }
    }
  }
}

void check_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.ndim() != rank) {
    throw std::invalid_argument(std::string(what) + ": expected rank " +
                                std::to_string(rank) + ", got shape " +
                                shape_string(t.shape()));
  }
}

void add_bias(Tensor& y, const Tensor& b) {
  const int c = y.dim(0);
  const std::size_t plane = static_cast<std::size_t>(y.dim(1)) * y.dim(2);
  for (int i = 0; i < c; ++i) {
    double* p = y.data() + i * plane;
    for (std::size_t j = 0; j < plane; ++j) p[j] += b[i];
  }
}

void accumulate_bias_grad(Tensor& db, const Tensor& dy) {
  const int c = dy.dim(0);
  const std::size_t plane = static_cast<std::size_t>(dy.dim(1)) * dy.dim(2);
  for (int i = 0; i < c; ++i) {
    const double* p = dy.data() + i * plane;
    double s = 0.0;
    for (std::size_t j = 0; j < plane; ++j) s += p[j];
    db[i] += s;
  }
}

}  // namespace

int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

int conv_transpose_out_size(int in, int kernel, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + kernel;
}

Var conv2d(Tape& tape, Var x, Var w, Var b, int stride, int pad) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  check_rank(xv, 3, "conv2d input");
  check_rank(wv, 4, "conv2d weight");
  if (wv.dim(1) != xv.dim(0) || wv.dim(2) != wv.dim(3)) {
    throw std::invalid_argument("conv2d: weight " + shape_string(wv.shape()) +
                                " incompatible with input " +
                                shape_string(xv.shape()));
  }
  const int cout = wv.dim(0);
  const int k = wv.dim(2);
  ConvGeom g{xv.dim(0), xv.dim(1), xv.dim(2), k, stride, pad,
             conv_out_size(xv.dim(1), k, stride, pad),
             conv_out_size(xv.dim(2), k, stride, pad)};
  if (g.out_h < 1 || g.out_w < 1) {
    throw std::invalid_argument("conv2d: input too small for kernel");
  }
  const int rows = g.channels * k * k;
  const int cols = g.out_h * g.out_w;

  MatR col(rows, cols);
  im2col(xv.data(), g, col.data());
  Tensor y({cout, g.out_h, g.out_w});
  MapR(y.data(), cout, cols).noalias() = CMapR(wv.data(), cout, rows) * col;
  if (b.defined()) add_bias(y, tape.value(b));

  return tape.record(
      std::move(y), {x, w, b},
      [x, w, b, g, rows, cols, cout, col = std::move(col)](Tape& t, int self) {
        const Tensor& dy = t.grad(Var{self});
        CMapR dym(dy.data(), cout, cols);
        if (t.requires_grad(w)) {
          MapR(t.grad_accumulator(w).data(), cout, rows).noalias() +=
              dym * col.transpose();
        }
        if (b.defined() && t.requires_grad(b)) {
          accumulate_bias_grad(t.grad_accumulator(b), dy);
        }
        if (t.requires_grad(x)) {
          MatR dcol = CMapR(t.value(w).data(), cout, rows).transpose() * dym;
          col2im(dcol.data(), g, t.grad_accumulator(x).data());
        }
      });
}

Var conv_transpose2d(Tape& tape, Var x, Var w, Var b, int stride, int pad) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  check_rank(xv, 3, "conv_transpose2d input");
  check_rank(wv, 4, "conv_transpose2d weight");
  if (wv.dim(0) != xv.dim(0) || wv.dim(2) != wv.dim(3)) {
    throw std::invalid_argument("conv_transpose2d: weight " +
                                shape_string(wv.shape()) +
                                " incompatible with input " +
                                shape_string(xv.shape()));
  }
  const int cin = xv.dim(0);
  const int cout = wv.dim(1);
  const int k = wv.dim(2);
  const int out_h = conv_transpose_out_size(xv.dim(1), k, stride, pad);
  const int out_w = conv_transpose_out_size(xv.dim(2), k, stride, pad);
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("conv_transpose2d: non-positive output size");
  }
  // Geometry of the adjoint convolution: output image -> input grid.
  ConvGeom g{cout, out_h, out_w, k, stride, pad, xv.dim(1), xv.dim(2)};
  if (conv_out_size(out_h, k, stride, pad) != g.out_h ||
      conv_out_size(out_w, k, stride, pad) != g.out_w) {
    throw std::invalid_argument("conv_transpose2d: inconsistent geometry");
  }
  const int rows = cout * k * k;
  const int cols = g.out_h * g.out_w;

  MatR col = CMapR(wv.data(), cin, rows).transpose() * CMapR(xv.data(), cin, cols);
  Tensor y({cout, out_h, out_w});
  col2im(col.data(), g, y.data());
  if (b.defined()) add_bias(y, tape.value(b));

  return tape.record(
      std::move(y), {x, w, b},
      [x, w, b, g, rows, cols, cin](Tape& t, int self) {
        const Tensor& dy = t.grad(Var{self});
        if (b.defined() && t.requires_grad(b)) {
          accumulate_bias_grad(t.grad_accumulator(b), dy);
        }
        const bool need_w = t.requires_grad(w);
        const bool need_x = t.requires_grad(x);
        if (!need_w && !need_x) return;
        MatR dcol(rows, cols);
        im2col(dy.data(), g, dcol.data());
        if (need_w) {
          MapR(t.grad_accumulator(w).data(), cin, rows).noalias() +=
              CMapR(t.value(x).data(), cin, cols) * dcol.transpose();
        }
        if (need_x) {
          MapR(t.grad_accumulator(x).data(), cin, cols).noalias() +=
              CMapR(t.value(w).data(), cin, rows) * dcol;
        }
      });
}

Var leaky_relu(Tape& tape, Var x, double slope) {
  const Tensor& xv = tape.value(x);
  Tensor y = xv;
  for (double& v : y.values()) {
    if (v < 0.0) v *= slope;
  }
  return tape.record(std::move(y), {x}, [x, slope](Tape& t, int self) {
    const Tensor& dy = t.grad(Var{self});
    const Tensor& xv = t.value(x);
    Tensor& dx = t.grad_accumulator(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dx[i] += xv[i] < 0.0 ? slope * dy[i] : dy[i];
    }
  });
}

namespace {

Var add_scaled(Tape& tape, Var a, Var b, double sign) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv)) {
    throw std::invalid_argument("elementwise op: shape mismatch " +
                                shape_string(av.shape()) + " vs " +
                                shape_string(bv.shape()));
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += sign * bv[i];
  return tape.record(std::move(y), {a, b}, [a, b, sign](Tape& t, int self) {
    const Tensor& dy = t.grad(Var{self});
    if (t.requires_grad(a)) t.grad_accumulator(a) += dy;
    if (t.requires_grad(b)) {
      Tensor& db = t.grad_accumulator(b);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += sign * dy[i];
    }
  });
}

}  // namespace

Var add(Tape& tape, Var a, Var b) { return add_scaled(tape, a, b, 1.0); }
Var sub(Tape& tape, Var a, Var b) { return add_scaled(tape, a, b, -1.0); }

Var concat_channels(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const Tensor& first = tape.value(parts[0]);
  check_rank(first, 3, "concat_channels");
  int channels = 0;
  for (Var p : parts) {
    const Tensor& v = tape.value(p);
    check_rank(v, 3, "concat_channels");
    if (v.dim(1) != first.dim(1) || v.dim(2) != first.dim(2)) {
      throw std::invalid_argument("concat_channels: spatial mismatch");
    }
    channels += v.dim(0);
  }
  Tensor y({channels, first.dim(1), first.dim(2)});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = tape.value(p);
    std::copy(v.data(), v.data() + v.size(), y.data() + offset);
    offset += v.size();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return tape.record(std::move(y), parents, [parents](Tape& t, int self) {
    const Tensor& dy = t.grad(Var{self});
    std::size_t offset = 0;
    for (Var p : parents) {
      const std::size_t n = t.value(p).size();
      if (t.requires_grad(p)) {
        Tensor& dp = t.grad_accumulator(p);
        for (std::size_t i = 0; i < n; ++i) dp[i] += dy[offset + i];
      }
      offset += n;
    }
  });
}

}  // namespace tdsr::nn

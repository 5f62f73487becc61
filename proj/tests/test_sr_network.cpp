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

#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "tdsr/degradation.hpp"
#include "tdsr/nn/ops.hpp"
#include "tdsr/sr_network.hpp"

using namespace tdsr;
using namespace tdsr::sr;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

SRConfig tiny_config(int factor) {
  SRConfig cfg;
  cfg.scale_factor = factor;
  cfg.num_projection_pairs = 2;
  cfg.feature_width = 2;
  return cfg;
}

double loss_of(const SRModel& m, const Image& lr, const Image& hr) {
  return rec_loss(hr, sr_forward(m, lr));
}

}  // namespace

TEST_CASE("projection geometry") {
  CHECK(projection_spec(2) == ProjectionUnitSpec{6, 2, 2});
  CHECK(projection_spec(4) == ProjectionUnitSpec{8, 4, 2});
  CHECK(projection_spec(8) == ProjectionUnitSpec{12, 8, 2});
  CHECK_THROWS_AS(projection_spec(3), std::invalid_argument);
  CHECK(build_sr(4, 2, 4, 1).projection() == ProjectionUnitSpec{8, 4, 2});
  CHECK(build_sr(8, 1, 4, 1).projection() == ProjectionUnitSpec{12, 8, 2});
  CHECK_THROWS_AS(build_sr(3, 2, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_sr(4, 0, 4, 1), std::invalid_argument);
}

TEST_CASE("initialisation is seeded") {
  const SRModel a = build_sr(4, 2, 4, 7);
  const SRModel b = build_sr(4, 2, 4, 7);
  const SRModel c = build_sr(4, 2, 4, 8);
  CHECK(a.params() == b.params());
  CHECK(a.params().hash() == b.params().hash());
  CHECK_FALSE(a.params() == c.params());
  CHECK(a.params().all_finite());
  // Layer shapes follow the unit kernel.
  CHECK(a.params().at("up1.deconv1.w").value.shape() == std::vector<int>{4, 4, 8, 8});
  CHECK(a.params().at("down1.conv1.w").value.shape() == std::vector<int>{4, 4, 8, 8});
  CHECK(a.params().find("down2.conv1.w") == nullptr);
}

TEST_CASE("output shapes") {
  const SRModel m4 = build_sr(4, 2, 4, 1);
  const Image out4 = sr_forward(m4, testing::random_image(3, 32, 32, 2));
  CHECK(out4.height() == 128);
  CHECK(out4.width() == 128);
  CHECK(out4.channels() == 3);
  const SRModel m8 = build_sr(8, 1, 2, 1);
  const Image out8 = sr_forward(m8, testing::random_image(3, 37, 37, 3));
  CHECK(out8.height() == 296);
  CHECK(out8.width() == 296);
  const Image rect = sr_forward(build_sr(2, 2, 2, 1), testing::random_image(3, 5, 9, 4));
  CHECK(rect.height() == 10);
  CHECK(rect.width() == 18);
  CHECK_THROWS_AS(sr_forward(m4, testing::random_image(1, 8, 8, 5)), std::invalid_argument);
}

TEST_CASE("up projection maps zero to zero with zero biases") {
  nn::ParameterStore ps;
  std::mt19937_64 rng(1);
  for (const char* n : {"w1", "w2", "w3"}) {
    Tensor w({3, 3, 6, 6});
    nn::init_uniform(w, 12, 1.0, rng);
    ps.add(n, std::move(w));
  }
  Tape tape;
  auto v = [&](const char* n) { return tape.constant(ps.at(n).value); };
  const Var zb = tape.constant(Tensor({3}));
  const ProjectionWeights w{v("w1"), zb, v("w2"), zb, v("w3"), zb};
  const Var out = up_projection(tape, w, projection_spec(2), 0.2, tape.constant(Tensor({3, 4, 4})));
  const Tensor& t = tape.value(out);
  CHECK(t.shape() == std::vector<int>{3, 8, 8});
  for (double x : t.values()) CHECK(x == 0.0);
  const Var down = down_projection(tape, w, projection_spec(2), 0.2, out);
  for (double x : tape.value(down).values()) CHECK(x == 0.0);
}

TEST_CASE("up projection output equals H0 when the down step inverts the up step") {
  // Delta kernels at (pad, pad): the transposed conv places L[y,x] at
  // (2y, 2x) and the strided conv reads it back, so L0 == L for L >= 0.
  const ProjectionUnitSpec spec = projection_spec(2);
  Tensor delta({1, 1, 6, 6});
  delta[2 * 6 + 2] = 1.0;
  Tensor w3({1, 1, 6, 6});
  std::mt19937_64 rng(4);
  nn::init_uniform(w3, 9, 1.0, rng);

  const Image lr_img = testing::random_image(1, 5, 5, 9, 0.1, 0.9);
  Tape tape;
  const Var zb = tape.constant(Tensor({1}));
  const Var d = tape.constant(delta);
  const ProjectionWeights w{d, zb, d, zb, tape.constant(w3), zb};
  const Var lr = tape.constant(nn::to_tensor(lr_img));
  const Var out = up_projection(tape, w, spec, 0.2, lr);

  const Var h0 = nn::leaky_relu(tape, nn::conv_transpose2d(tape, lr, d, zb, 2, 2), 0.2);
  const Var l0 = nn::leaky_relu(tape, nn::conv2d(tape, h0, d, zb, 2, 2), 0.2);
  CHECK(tape.value(l0) == tape.value(lr));
  CHECK(tape.value(out) == tape.value(h0));
}

TEST_CASE("projection units reject mismatched features") {
  Tape tape;
  const Var zb = tape.constant(Tensor({1}));
  const Var k = tape.constant(Tensor({1, 1, 6, 6}));
  const Var k8 = tape.constant(Tensor({1, 1, 8, 8}));
  // 8x8 kernel with stride 2 does not invert back to the input size.
  const ProjectionWeights w{k, zb, k8, zb, k, zb};
  CHECK_THROWS_AS(up_projection(tape, w, projection_spec(2), 0.2, tape.constant(Tensor({1, 4, 4}))),
                  std::invalid_argument);
}

TEST_CASE("rec_loss") {
  const Image z(1, 1, 2, 0.0);
  const Image o(1, 1, 2, 1.0);
  CHECK(rec_loss(z, o) == 1.0);
  CHECK(rec_loss(o, o) == 0.0);
  CHECK_THROWS_AS(rec_loss(z, Image(1, 2, 1)), std::invalid_argument);

  const Image a = testing::random_image(3, 9, 7, 1);
  const Image b = testing::random_image(3, 9, 7, 2);
  double oracle = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 7; ++x) oracle += (a.at(c, y, x) - b.at(c, y, x)) * (a.at(c, y, x) - b.at(c, y, x));
  oracle /= 3 * 9 * 7;
  CHECK(std::abs(rec_loss(a, b) - oracle) <= 1e-12);
  CHECK(rec_loss(a, b) == rec_loss(b, a));
  CHECK(rec_loss(a, b) > 0.0);
}

TEST_CASE("rec_loss gradient matches finite differences") {
  const Image x = testing::random_image(2, 3, 3, 1);
  const Image xh = testing::random_image(2, 3, 3, 2);
  const Tensor g = rec_loss_grad(x, nn::to_tensor(xh));
  for (std::size_t i = 0; i < g.size(); ++i) {
    Image p = xh, m = xh;
    p.data()[i] += 1e-6;
    m.data()[i] -= 1e-6;
    CHECK(g[i] == doctest::Approx((rec_loss(x, p) - rec_loss(x, m)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("full-model parameter gradient matches finite differences") {
  for (bool residual : {true, false}) {
    CAPTURE(residual);
    SRConfig cfg = tiny_config(2);
    cfg.bicubic_residual = residual;
    SRModel model = build_sr(cfg, 21);
    REQUIRE(model.params().num_scalars() <= 5000);
    // Non-zero biases keep activations away from the kink at zero.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (auto& p : model.params().params()) {
      if (p.name.ends_with(".b")) for (double& v : p.value.values()) v = u(rng);
    }
    const Image lr = testing::random_image(3, 4, 4, 5);
    const Image hr = testing::random_image(3, 8, 8, 6);

    Tape tape;
    model.params().zero_grad();
    const Var out = sr_forward(tape, model, lr, true);
    tape.backward(out, rec_loss_grad(hr, tape.value(out)));

    const double h = 1e-6;
    double worst = 0.0;
    int checked = 0;
    for (auto& p : model.params().params()) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double orig = p.value[i];
        p.value[i] = orig + h;
        const double lp = loss_of(model, lr, hr);
        p.value[i] = orig - h;
        const double lm = loss_of(model, lr, hr);
        p.value[i] = orig;
        const double fd = (lp - lm) / (2 * h);
        worst = std::max(worst, testing::rel_err(p.grad[i], fd, 1e-7));
        ++checked;
      }
    }
    CHECK(checked == static_cast<int>(model.params().num_scalars()));
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("single output pixel gradient matches finite differences") {
  SRModel model = build_sr(tiny_config(4), 2);
  const Image lr = testing::random_image(3, 3, 3, 8);
  Tape tape;
  model.params().zero_grad();
  const Var out = sr_forward(tape, model, lr, true);
  Tensor seed = Tensor::zeros_like(tape.value(out));
  seed.at(1, 5, 7) = 1.0;
  tape.backward(out, seed);
  for (const char* name : {"feat.w", "up2.deconv2.w", "down1.conv2.b", "recon.w"}) {
    auto& p = model.params().at(name);
    for (std::size_t i = 0; i < p.value.size(); i += 7) {
      const double orig = p.value[i];
      p.value[i] = orig + 1e-6;
      const double vp = sr_forward(model, lr).at(1, 5, 7);
      p.value[i] = orig - 1e-6;
      const double vm = sr_forward(model, lr).at(1, 5, 7);
      p.value[i] = orig;
      CHECK(testing::rel_err(p.grad[i], (vp - vm) / 2e-6, 1e-7) <= 1e-3);
    }
  }
}

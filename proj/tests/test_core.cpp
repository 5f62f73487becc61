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
#include "tdsr/core/geometry.hpp"
#include "tdsr/core/types.hpp"

using namespace tdsr;

namespace {

// Counts cells of a fine grid whose centers fall inside each box.
double raster_iou(const Box& a, const Box& b, double cell) {
  const double lo_x = std::min(a.xmin, b.xmin), hi_x = std::max(a.xmax, b.xmax);
  const double lo_y = std::min(a.ymin, b.ymin), hi_y = std::max(a.ymax, b.ymax);
  long inter = 0, uni = 0;
  for (double y = lo_y + cell / 2; y < hi_y; y += cell) {
    for (double x = lo_x + cell / 2; x < hi_x; x += cell) {
      const bool in_a = x >= a.xmin && x < a.xmax && y >= a.ymin && y < a.ymax;
      const bool in_b = x >= b.xmin && x < b.xmax && y >= b.ymin && y < b.ymax;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST_CASE("image construction and clamping") {
  Image img(3, 2, 4, 0.5);
  CHECK(img.channels() == 3);
  CHECK(img.size() == 24);
  img.at(1, 1, 3) = 1.7;
  img.at(0, 0, 0) = -0.2;
  const Image c = img.clamped();
  CHECK(c.at(1, 1, 3) == 1.0);
  CHECK(c.at(0, 0, 0) == 0.0);
  CHECK_THROWS_AS(Image(1, 0, 3), std::invalid_argument);
}

TEST_CASE("ground truth validation") {
  GroundTruth gt{{{0, 0, 2, 2}}, {1}};
  CHECK_NOTHROW(gt.validate(3));
  gt.labels = {0};
  CHECK_THROWS_AS(gt.validate(3), std::invalid_argument);
  gt.labels = {4};
  CHECK_THROWS_AS(gt.validate(3), std::invalid_argument);
  gt.labels = {1, 2};
  CHECK_THROWS_AS(gt.validate(3), std::invalid_argument);
  GroundTruth flat{{{1, 1, 1, 3}}, {1}};
  CHECK_THROWS_AS(flat.validate(3), std::invalid_argument);
}

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(raster_iou({0, 0, 2, 2}, {1, 1, 3, 3}, 0.01) == doctest::Approx(1.0 / 7.0).epsilon(1e-9));
  CHECK_THROWS_AS(iou({0, 0, 0, 2}, {0, 0, 1, 1}), std::invalid_argument);
}

TEST_CASE("iou matches raster oracle, is symmetric and bounded") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(0, 20);
  for (int trial = 0; trial < 200; ++trial) {
    // Quarter-pixel coordinates are exact on a 1/8 grid.
    auto q = [&] { return coord(rng) / 4.0; };
    Box a{q(), q(), 0, 0}, b{q(), q(), 0, 0};
    a.xmax = a.xmin + 0.25 + q();
    a.ymax = a.ymin + 0.25 + q();
    b.xmax = b.xmin + 0.25 + q();
    b.ymax = b.ymin + 0.25 + q();
    const double v = iou(a, b);
    CHECK(v == doctest::Approx(raster_iou(a, b, 0.125)).epsilon(1e-12));
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (v == 1.0) CHECK(a == b);
  }
}

TEST_CASE("encode/decode examples") {
  const Box anchor = Box::from_center(1, 1, 2, 2);
  const Box gt = Box::from_center(2, 2, 2, 2);
  const BoxOffsets o = encode_box(gt, anchor, {0.1, 0.2});
  CHECK(o.cx == doctest::Approx(5.0));
  CHECK(o.cy == doctest::Approx(5.0));
  CHECK(o.w == doctest::Approx(0.0));
  CHECK(o.h == doctest::Approx(0.0));
  const BoxOffsets zero = encode_box(anchor, anchor);
  CHECK(zero == BoxOffsets{0, 0, 0, 0});
  CHECK(decode_box({0, 0, 0, 0}, anchor) == anchor);
  const Box back = decode_box({5, 5, 0, 0}, anchor, {0.1, 0.2});
  CHECK(back.center_x() == doctest::Approx(2.0));
  CHECK(back.center_y() == doctest::Approx(2.0));
  CHECK(back.width() == doctest::Approx(2.0));
  CHECK(back.height() == doctest::Approx(2.0));
}

TEST_CASE("encode/decode round trip to 1e-9") {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Box gt = testing::random_box(rng, 100.0);
    const Box anchor = testing::random_box(rng, 100.0);
    const Box back = decode_box(encode_box(gt, anchor), anchor);
    worst = std::max({worst, std::abs(back.xmin - gt.xmin), std::abs(back.ymin - gt.ymin),
                      std::abs(back.xmax - gt.xmax), std::abs(back.ymax - gt.ymax)});
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("decode rejects an overflowing extent") {
  CHECK_THROWS_AS(decode_box({0, 0, 1e6, 0}, {0, 0, 1, 1}), NumericalError);
}

TEST_CASE("nms examples") {
  CHECK(nms({}, 0.5).empty());
  const Detection one{{0, 0, 1, 1}, 1, 0.4};
  CHECK(nms({one}, 0.5) == DetectionSet{one});

  const Detection a{{0, 0, 10, 10}, 1, 0.9};
  const Detection a2{{0, 0, 10, 10}, 1, 0.8};
  CHECK(nms({a2, a}, 0.5) == DetectionSet{a});

  // B overlaps A with IoU 0.6: widths 10 and 10, shift chosen so 0.6 = 10s/(200-10s)... s = 7.5.
  const Detection b{{2.5, 0, 12.5, 10}, 1, 0.8};
  REQUIRE(iou(a.box, b.box) == doctest::Approx(0.6));
  const Detection c{{50, 50, 60, 60}, 1, 0.7};
  CHECK(nms({c, b, a}, 0.5) == DetectionSet{a, c});
  // Other classes never suppress each other unless requested.
  Detection b_other = b;
  b_other.label = 2;
  CHECK(nms({a, b_other}, 0.5).size() == 2);
  CHECK(nms({a, b_other}, 0.5, false).size() == 1);
  CHECK_THROWS_AS(nms({a}, 0.0), std::invalid_argument);
}

TEST_CASE("nms properties on random sets") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<int> label(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    DetectionSet dets;
    for (int i = 0; i < 15; ++i) {
      dets.push_back({testing::random_box(rng, 30.0, 3.0), label(rng), score(rng)});
    }
    const double thr = 0.3 + 0.4 * score(rng);
    const DetectionSet kept = nms(dets, thr);
    for (std::size_t i = 1; i < kept.size(); ++i) CHECK(kept[i - 1].score >= kept[i].score);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      CHECK(std::find(dets.begin(), dets.end(), kept[i]) != dets.end());
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (kept[i].label == kept[j].label) CHECK(iou(kept[i].box, kept[j].box) <= thr);
      }
    }
    // Every dropped detection is covered by a kept, higher-scored one of its class.
    for (const Detection& d : dets) {
      if (std::find(kept.begin(), kept.end(), d) != kept.end()) continue;
      const bool covered = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
        return k.label == d.label && k.score >= d.score && iou(k.box, d.box) > thr;
      });
      CHECK(covered);
    }
  }
}

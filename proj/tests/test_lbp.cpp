/*
Copyright 2026 The tamgan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tamgan/lbp.hpp"

namespace tamgan {
namespace {

Tensor<double> patch(std::initializer_list<double> v) {
  Tensor<double> t(1, 1, 3, 3);
  std::size_t i = 0;
  for (double x : v) t[i++] = x;
  return t;
}

// Independent per-bit evaluation for a single 3x3 patch, written out long-hand.
int hand_code(const Tensor<double>& p) {
  const double c = p[4];
  const double nb[8] = {p[0], p[1], p[2], p[3], p[5], p[6], p[7], p[8]};
  int code = 0;
  for (int i = 0; i < 8; ++i) code += (nb[i] > c) ? (1 << i) : 0;
  return code;
}

TEST(ToGray, WeightedChannelCoefficients) {
  Tensor<double> rgb(1, 3, 1, 3);
  // pixel 0: black, pixel 1: white, pixel 2: pure red
  for (int c = 0; c < 3; ++c) rgb.at(0, c, 0, 1) = 255;
  rgb.at(0, 0, 0, 2) = 255;
  const auto g = to_gray(rgb);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_NEAR(g[1], 253.98, 1e-9);
  EXPECT_NEAR(g[2], 76.245, 1e-9);
}

TEST(ToGray, RejectsWrongChannelCount) {
  EXPECT_THROW(to_gray(Tensor<double>(1, 4, 3, 3)), InvalidInput);
  EXPECT_THROW(to_gray(Tensor<double>(1, 1, 3, 3)), InvalidInput);
}

TEST(LbpExact, ConstantImageIsZero) {
  const auto out = lbp_exact(Tensor<double>(1, 1, 6, 7, 7.0));
  EXPECT_EQ(out.shape(), (Shape{1, 1, 4, 5}));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(LbpExact, WorkedPatch) {
  const auto p = patch({5, 9, 1, 4, 4, 6, 7, 2, 3});
  EXPECT_EQ(hand_code(p), 51);
  EXPECT_EQ(lbp_exact(p)[0], 51.0);
}

TEST(LbpExact, BinaryPatch) {
  const auto p = patch({1, 0, 1, 0, 0, 1, 0, 1, 0});
  EXPECT_EQ(hand_code(p), 85);
  EXPECT_EQ(lbp_exact(p)[0], 85.0);
}

TEST(LbpExact, TieFlagSetsEqualNeighbours) {
  const auto p = patch({5, 9, 1, 4, 4, 6, 7, 2, 3});
  LbpConfig cfg;
  cfg.ties_as_one = true;
  EXPECT_EQ(lbp_exact(p, cfg)[0], 51.0 + 8.0);
}

TEST(LbpExact, IntegerValuedInByteRange) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-50, 300);
  Tensor<double> img(2, 1, 12, 10);
  for (auto& v : img.values()) v = d(rng);
  const auto out = lbp_exact(img);
  for (double v : out.values()) {
    EXPECT_EQ(v, std::floor(v));
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 255);
  }
}

TEST(LbpExact, MatchesHandCodeEverywhere) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> d(0, 9);
  Tensor<double> img(1, 1, 9, 9);
  for (auto& v : img.values()) v = d(rng);
  const auto out = lbp_exact(img);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      Tensor<double> p(1, 1, 3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) p.at(0, 0, i, j) = img.at(0, 0, y + i, x + j);
      EXPECT_EQ(out.at(0, 0, y, x), hand_code(p));
    }
}

TEST(LbpExact, DilationSamplesAtRadius) {
  // Neighbours at distance 4; the adjacent ring is zero and must be ignored.
  Tensor<double> img(1, 1, 9, 9, 0.0);
  img.at(0, 0, 4, 4) = 1;
  img.at(0, 0, 0, 0) = 5;  // TL at radius 4
  img.at(0, 0, 8, 8) = 5;  // BR at radius 4
  img.at(0, 0, 3, 3) = 9;  // TL at radius 1, ignored
  LbpConfig cfg;
  cfg.dilation = 4;
  const auto out = lbp_exact(img, cfg);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(out[0], 1.0 + 128.0);
}

TEST(LbpExact, TooSmallIsInvalid) {
  EXPECT_THROW(lbp_exact(Tensor<double>(1, 1, 2, 5)), InvalidInput);
  LbpConfig cfg;
  cfg.dilation = 4;
  EXPECT_THROW(lbp_exact(Tensor<double>(1, 1, 8, 9), cfg), InvalidInput);
  EXPECT_THROW(lbp_surrogate(Tensor<double>(1, 1, 8, 9), cfg), InvalidInput);
}

TEST(LbpSurrogate, ConstantImageIsZero) {
  const auto out = lbp_surrogate(Tensor<double>(1, 1, 5, 5, 3.0));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(LbpSurrogate, UniformPositiveDifference) {
  const auto p = patch({9, 9, 9, 9, 5, 9, 9, 9, 9});
  EXPECT_NEAR(lbp_surrogate(p)[0], 4.0, 1e-12);
}

TEST(LbpSurrogate, KernelsAreFixedDifferenceFilters) {
  const LbpLayer<double> layer;
  EXPECT_EQ(LbpLayer<double>::parameter_count(), 0u);
  const auto& k = layer.kernels();
  for (int i = 0; i < 8; ++i) {
    double sum = 0;
    for (int p = 0; p < 9; ++p) sum += k.plane(i, 0)[p];
    EXPECT_EQ(sum, 0.0);
    EXPECT_EQ(k.at(i, 0, 1, 1), -1.0);
  }
}

TEST(LbpSurrogate, BinaryImagesMatchExactOperator) {
  std::mt19937_64 rng(13);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> img(1, 1, 16, 16);
    for (auto& v : img.values()) v = coin(rng) ? 1.0 : 0.0;
    const auto exact = lbp_exact(img);
    const auto sur = lbp_surrogate(img);
    for (std::size_t i = 0; i < exact.size(); ++i) ASSERT_EQ(sur[i] * 255.0, exact[i]);
  }
}

TEST(LbpSurrogate, ShiftInvariance) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> d(0, 255);
  Tensor<double> img(1, 1, 12, 12);
  for (auto& v : img.values()) v = d(rng);
  Tensor<double> shifted(1, 1, 12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) shifted.at(0, 0, y, x) = img.at(0, 0, y, (x + 11) % 12);
  // shifted(y, x) = img(y, x - 1) on the interior.
  const auto a = lbp_surrogate(img), b = lbp_surrogate(shifted);
  const auto ea = lbp_exact(img), eb = lbp_exact(shifted);
  for (int y = 0; y < 10; ++y)
    for (int x = 1; x < 10; ++x) {
      EXPECT_DOUBLE_EQ(b.at(0, 0, y, x), a.at(0, 0, y, x - 1));
      EXPECT_EQ(eb.at(0, 0, y, x), ea.at(0, 0, y, x - 1));
    }
}

TEST(LbpSurrogate, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> d(0, 255);
  for (int dilation : {1, 2}) {
    LbpConfig cfg;
    cfg.dilation = dilation;
    Tensor<double> img(1, 1, 8, 8);
    for (auto& v : img.values()) v = d(rng);
    const auto out = lbp_surrogate(img, cfg);
    Tensor<double> r(out.shape());
    for (auto& v : r.values()) v = d(rng) / 255.0;
    const auto grad = lbp_surrogate_backward(img, r, cfg);
    const double h = 1e-5;
    for (std::size_t i = 0; i < img.size(); ++i) {
      auto f = [&](double delta) {
        Tensor<double> t = img;
        t[i] += delta;
        const auto o = lbp_surrogate(t, cfg);
        double s = 0;
        for (std::size_t k = 0; k < o.size(); ++k) s += r[k] * o[k];
        return s;
      };
      const double fd = (f(h) - f(-h)) / (2 * h);
      EXPECT_NEAR(grad[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace
}  // namespace tamgan

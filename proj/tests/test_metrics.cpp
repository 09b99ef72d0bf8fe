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

#include "tamgan/metrics.hpp"

namespace tamgan {
namespace {

Tensor<double> uniform(Shape s, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(s);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

TEST(Metrics, IdentityCases) {
  const auto i = uniform({1, 3, 32, 32}, 0, 1, 1);
  EXPECT_EQ(mae(i, i), 0.0);
  EXPECT_TRUE(std::isinf(psnr(i, i)));
  EXPECT_GT(psnr(i, i), 0);
  EXPECT_EQ(ssim(i, i), 1.0);
}

TEST(Metrics, PsnrOfUniformOffset) {
  const auto i = uniform({1, 3, 16, 16}, 0, 0.9, 2);
  auto o = i;
  for (auto& v : o.values()) v += 0.1;
  EXPECT_NEAR(mse(o, i), 0.01, 1e-15);
  EXPECT_NEAR(psnr(o, i), 20.0, 1e-12);
  EXPECT_NEAR(mae(o, i), 0.1, 1e-15);
}

TEST(Metrics, MaeMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto o = uniform({1, 3, 8, 8}, 0, 1, seed), i = uniform({1, 3, 8, 8}, 0, 1, seed + 100);
    double acc = 0;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) acc += std::fabs(o.at(0, c, y, x) - i.at(0, c, y, x));
    EXPECT_NEAR(mae(o, i), acc / 192.0, 1e-12);
  }
}

TEST(Metrics, ShapeMismatchRejected) {
  EXPECT_THROW(mae(Tensor<double>(1, 3, 4, 4), Tensor<double>(1, 3, 4, 5)), InvalidInput);
  EXPECT_THROW(psnr(Tensor<double>(1, 3, 4, 4), Tensor<double>(1, 1, 4, 4)), InvalidInput);
  EXPECT_THROW(ssim(Tensor<double>(1, 3, 16, 16), Tensor<double>(1, 3, 16, 17)), InvalidInput);
}

TEST(Metrics, MaskedPsnrCountsHoleOnly) {
  const auto i = uniform({1, 3, 8, 8}, 0, 0.5, 3);
  auto o = i;
  Tensor<double> m(1, 1, 8, 8, 1.0);
  for (int x = 0; x < 8; ++x) m.at(0, 0, 2, x) = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int x = 0; x < 8; ++x) o.at(0, c, 2, x) += 0.1;
  o.at(0, 0, 5, 5) = 0.9;  // known pixel, ignored
  EXPECT_NEAR(psnr_masked(o, i, m), 20.0, 1e-9);
  EXPECT_THROW(psnr_masked(o, i, Tensor<double>(1, 1, 8, 8, 1.0)), InvalidInput);
}

// Direct evaluation of the windowed statistics at every valid position with
// a 2-D Gaussian window.
double ssim_oracle(const Tensor<double>& a, const Tensor<double>& b) {
  const int k = 11, r = 5;
  std::vector<double> w(k * k);
  double s = 0;
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) s += w[y * k + x] = std::exp(-((y - r) * (y - r) + (x - r) * (x - r)) / 4.5);
  for (auto& v : w) v /= s;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  int planes = 0;
  for (int n = 0; n < a.n(); ++n)
    for (int c = 0; c < a.c(); ++c) {
      double acc = 0;
      int count = 0;
      for (int y = 0; y + k <= a.h(); ++y)
        for (int x = 0; x + k <= a.w(); ++x) {
          double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              const double wt = w[dy * k + dx];
              const double va = a.at(n, c, y + dy, x + dx), vb = b.at(n, c, y + dy, x + dx);
              ma += wt * va;
              mb += wt * vb;
              aa += wt * va * va;
              bb += wt * vb * vb;
              ab += wt * va * vb;
            }
          const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
          acc += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
          ++count;
        }
      total += acc / count;
      ++planes;
    }
  return total / planes;
}

TEST(Metrics, SsimMatchesDirectWindowOracle) {
  const auto a = uniform({1, 3, 20, 24}, 0, 1, 4);
  auto b = a;
  const auto noise = uniform(a.shape(), -0.2, 0.2, 5);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::clamp(b[i] + noise[i], 0.0, 1.0);
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-10);
}

TEST(Metrics, SsimSymmetricAndBounded) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = uniform({1, 3, 32, 32}, 0, 1, seed), b = uniform({1, 3, 32, 32}, 0, 1, seed + 9);
    const double ab = ssim(a, b);
    EXPECT_NEAR(ab, ssim(b, a), 1e-9);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
  }
}

// ---------------------------------------------------------------------------
// Edge metrics.

// Dark/bright step with a single mid-level transition row or column, so the
// gradient magnitude has a strict maximum on the transition line.
Tensor<double> step_image(int size, int transition, bool vertical) {
  Tensor<double> t(1, 3, size, size);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int p = vertical ? x : y;
        t.at(0, c, y, x) = p < transition ? 0.1 : (p == transition ? 0.5 : 0.9);
      }
  return t;
}

Tensor<double> hole_rect(int size, int y0, int y1, int x0, int x1) {
  Tensor<double> m(1, 1, size, size, 1.0);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.at(0, 0, y, x) = 0.0;
  return m;
}

TEST(Canny, StepEdgeIsOnePixelLine) {
  const auto e = canny(unit_gray(step_image(32, 15, true)));
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool expected = x == 15 && y >= 1 && y <= 30;
      EXPECT_EQ(e[y * 32 + x], expected ? 1 : 0) << y << "," << x;
    }
}

TEST(Canny, ConstantImageHasNoEdges) {
  const auto e = canny(Tensor<double>(1, 1, 16, 16, 0.3));
  for (auto v : e) EXPECT_EQ(v, 0);
  EXPECT_THROW(canny(Tensor<double>(1, 3, 16, 16)), InvalidInput);
  EXPECT_THROW(canny(Tensor<double>(1, 1, 16, 16), {1.0, 0.3, 0.2}), ConfigError);
}

TEST(EdgeMetrics, IdenticalImagesScorePerfect) {
  const auto i = step_image(32, 15, true);
  const auto r = edge_metrics(i, i, hole_rect(32, 8, 23, 10, 21));
  EXPECT_EQ(r.tp, 16);
  EXPECT_EQ(r.fn, 0);
  EXPECT_EQ(r.fp, 0);
  EXPECT_EQ(r.tn, 16 * 12 - 16);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(EdgeMetrics, OnePixelShiftConfusionMatrix) {
  // Labels on column 15, predictions on column 16; hole rows 8..23, cols 10..21.
  const auto i = step_image(32, 15, true), o = step_image(32, 16, true);
  const auto r = edge_metrics(o, i, hole_rect(32, 8, 23, 10, 21));
  EXPECT_EQ(r.tp, 0);
  EXPECT_EQ(r.fp, 16);
  EXPECT_EQ(r.fn, 16);
  EXPECT_EQ(r.tn, 160);
  EXPECT_DOUBLE_EQ(r.accuracy, 160.0 / 192.0);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(EdgeMetrics, PartialOverlapConfusionMatrix) {
  // Horizontal edges on rows 12 (labels) and 13 (predictions); the hole spans
  // rows 10..12 and cols 0..31, which includes the border columns.
  const auto i = step_image(32, 12, false), o = step_image(32, 13, false);
  const auto r = edge_metrics(o, i, hole_rect(32, 10, 12, 0, 31));
  EXPECT_EQ(r.tp, 0);
  EXPECT_EQ(r.fn, 30);
  EXPECT_EQ(r.fp, 0);
  EXPECT_EQ(r.tn, 96 - 30);
  EXPECT_EQ(r.recall, 0.0);
  // Widen the hole to row 13: predictions now count as false positives.
  const auto w = edge_metrics(o, i, hole_rect(32, 10, 13, 0, 31));
  EXPECT_EQ(w.fp, 30);
  EXPECT_EQ(w.fn, 30);
  EXPECT_EQ(w.tn, 128 - 60);
}

TEST(EdgeMetrics, BlankPredictionHasZeroRecall) {
  const auto i = step_image(32, 15, true);
  const Tensor<double> o(i.shape(), 0.4);
  const auto r = edge_metrics(o, i, hole_rect(32, 4, 27, 4, 27));
  EXPECT_GT(r.fn, 0);
  EXPECT_EQ(r.tp, 0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(EdgeMetrics, EmptyHoleIsAnError) {
  const auto i = step_image(32, 15, true);
  EXPECT_THROW(edge_metrics(i, i, Tensor<double>(1, 1, 32, 32, 1.0)), InvalidInput);
}

TEST(EdgeMetrics, InvariantToPixelsAwayFromHole) {
  // Pad equals the stencil reach: Gaussian radius ceil(4 sigma), Sobel 1,
  // suppression 1.
  const CannyConfig cfg;
  const int pad = static_cast<int>(std::ceil(4 * cfg.sigma)) + 2;
  const auto i = uniform({1, 3, 48, 48}, 0, 1, 11);
  const auto o = uniform({1, 3, 48, 48}, 0, 1, 12);
  const auto m = hole_rect(48, 16, 31, 16, 31);
  const auto base = edge_metrics(o, i, m, cfg);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto o2 = o;
    const auto junk = uniform(o.shape(), 0, 1, 50 + seed);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) {
          const bool near = y >= 16 - pad && y <= 31 + pad && x >= 16 - pad && x <= 31 + pad;
          if (!near) o2.at(0, c, y, x) = junk.at(0, c, y, x);
        }
    const auto r = edge_metrics(o2, i, m, cfg);
    EXPECT_EQ(r.tp, base.tp);
    EXPECT_EQ(r.fp, base.fp);
    EXPECT_EQ(r.tn, base.tn);
    EXPECT_EQ(r.fn, base.fn);
  }
}

TEST(EdgeMetrics, RatiosInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = edge_metrics(uniform({1, 3, 32, 32}, 0, 1, seed),
                                uniform({1, 3, 32, 32}, 0, 1, seed + 7), hole_rect(32, 4, 27, 4, 27));
    for (double v : {r.accuracy, r.precision, r.recall, r.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    if (r.precision > 0 && r.recall > 0) {
      EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-15);
    }
  }
}

// ---------------------------------------------------------------------------
// Aggregation and latency.

TEST(Summary, PerBinMeansMatchRecomputation) {
  std::vector<ItemMetrics> items;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < 12; ++i) {
    items.push_back({i, kMaskBins[i % 3], 0.2, u(rng), 20 + u(rng), u(rng)});
  }
  const auto bins = summarize(items);
  ASSERT_EQ(bins.size(), 3u);
  for (std::size_t b = 0; b < 3; ++b) {
    double m = 0, p = 0, s = 0;
    for (std::size_t i = b; i < 12; i += 3) {
      m += items[i].mae;
      p += items[i].psnr;
      s += items[i].ssim;
    }
    const auto& got = bins.at(kMaskBins[b]);
    EXPECT_EQ(got.count, 4u);
    EXPECT_NEAR(got.mae, m / 4, 1e-15);
    EXPECT_NEAR(got.psnr, p / 4, 1e-13);
    EXPECT_NEAR(got.ssim, s / 4, 1e-15);
  }
}

TEST(Summary, InfinitePsnrSerialisesAsString) {
  MetricsReport r;
  r.items.push_back({0, MaskBin::r10_20, 0.15, 0.0, std::numeric_limits<double>::infinity(), 1.0});
  r.bins = summarize(r.items);
  const auto j = to_json(r);
  EXPECT_EQ(j["bins"]["10-20"]["psnr"], "inf");
  EXPECT_EQ(j["items"][0]["psnr"], "inf");
}

TEST(Latency, SummaryStatistics) {
  const auto r = summarize_latency({5, 1, 3, 2, 4});
  EXPECT_EQ(r.min_ms, 1);
  EXPECT_EQ(r.max_ms, 5);
  EXPECT_EQ(r.mean_ms, 3);
  EXPECT_EQ(r.p95_ms, 5);
  EXPECT_THROW(summarize_latency({}), InvalidInput);
}

class Trained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    nets_ = new MultiGan<float>();
    nets_->init(17);
    nets_->trained.fill(true);
  }
  static void TearDownTestSuite() { delete nets_; }
  static MultiGan<float>* nets_;
};
MultiGan<float>* Trained::nets_ = nullptr;

TEST_F(Trained, BenchSingleIteration) {
  const auto r = bench(*nets_, 1, 0);
  EXPECT_EQ(r.iters, 1);
  EXPECT_GT(r.mean_ms, 0);
  EXPECT_GE(r.mean_ms, r.min_ms);
  EXPECT_LE(r.mean_ms, r.max_ms);
  EXPECT_THROW(bench(*nets_, 0), InvalidInput);
}

TEST_F(Trained, BenchMeanWithinRange) {
  const auto r = bench(*nets_, 3, 1);
  EXPECT_EQ(r.samples_ms.size(), 3u);
  EXPECT_GE(r.mean_ms, r.min_ms);
  EXPECT_LE(r.mean_ms, r.max_ms);
  EXPECT_GE(r.p95_ms, r.mean_ms);
}

TEST_F(Trained, EvaluateRecomputesPerBinMeans) {
  const Dataset data = Dataset::synthetic(2, 4);
  EvalConfig cfg;
  cfg.bins = {MaskBin::r10_20, MaskBin::r40_50};
  cfg.seed = 5;
  const auto r = evaluate(*nets_, data, cfg);
  ASSERT_EQ(r.items.size(), 4u);
  for (const auto& it : r.items) {
    EXPECT_EQ(classify_ratio(it.hole_ratio), it.bin);
    EXPECT_GE(it.mae, 0);
    EXPECT_TRUE(std::isfinite(it.psnr));
  }
  for (MaskBin b : cfg.bins) {
    double m = 0;
    for (const auto& it : r.items)
      if (it.bin == b) m += it.mae;
    EXPECT_NEAR(r.bins.at(b).mae, m / 2, 1e-15);
  }
  // Composited output leaves known pixels exact, so error concentrates in
  // larger holes.
  EXPECT_LT(r.bins.at(MaskBin::r10_20).mae, r.bins.at(MaskBin::r40_50).mae);
}

TEST_F(Trained, EvaluateIsDeterministic) {
  const Dataset data = Dataset::synthetic(1, 4);
  EvalConfig cfg;
  cfg.bins = {MaskBin::r20_30};
  EXPECT_EQ(to_json(evaluate(*nets_, data, cfg)), to_json(evaluate(*nets_, data, cfg)));
}

}  // namespace
}  // namespace tamgan

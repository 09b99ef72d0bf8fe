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

// Image-quality metrics, Canny edge recovery on hole pixels, per-bin
// evaluation and latency benchmarking. Quality metrics take images in [0, 1].

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <spdlog/fmt/fmt.h>

#include "tamgan/dataset.hpp"
#include "tamgan/lbp.hpp"
#include "tamgan/masks.hpp"
#include "tamgan/nets.hpp"

namespace tamgan {

// [-1, 1] -> [0, 1].
template <typename T>
Tensor<double> to_unit(const Tensor<T>& x) {
  Tensor<double> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (static_cast<double>(x[i]) + 1.0) / 2.0;
  return y;
}

inline double mae(const Tensor<double>& o, const Tensor<double>& i) {
  require_same_shape(o.shape(), i.shape(), "mae");
  double acc = 0;
  for (std::size_t k = 0; k < o.size(); ++k) acc += std::abs(o[k] - i[k]);
  return acc / static_cast<double>(o.size());
}

inline double mse(const Tensor<double>& o, const Tensor<double>& i) {
  require_same_shape(o.shape(), i.shape(), "mse");
  double acc = 0;
  for (std::size_t k = 0; k < o.size(); ++k) acc += (o[k] - i[k]) * (o[k] - i[k]);
  return acc / static_cast<double>(o.size());
}

inline double psnr_from_mse(double m) {
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

// Peak 1.0; +inf when the images are identical.
inline double psnr(const Tensor<double>& o, const Tensor<double>& i) {
  return psnr_from_mse(mse(o, i));
}

// PSNR restricted to hole pixels (mask == 0), all channels.
inline double psnr_masked(const Tensor<double>& o, const Tensor<double>& i,
                          const Tensor<double>& mask) {
  require_same_shape(o.shape(), i.shape(), "psnr_masked");
  if (mask.c() != 1 || mask.n() != o.n() || mask.h() != o.h() || mask.w() != o.w()) {
    throw InvalidInput("psnr_masked: mask shape " + mask.shape().str());
  }
  double acc = 0;
  std::size_t count = 0;
  for (int n = 0; n < o.n(); ++n) {
    const double* m = mask.plane(n, 0);
    for (int c = 0; c < o.c(); ++c) {
      const double* a = o.plane(n, c);
      const double* b = i.plane(n, c);
      for (std::size_t p = 0; p < o.shape().plane(); ++p) {
        if (m[p] != 0.0) continue;
        acc += (a[p] - b[p]) * (a[p] - b[p]);
        ++count;
      }
    }
  }
  if (count == 0) throw InvalidInput("psnr_masked: mask has no hole pixels");
  return psnr_from_mse(acc / static_cast<double>(count));
}

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

namespace detail {

inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(size);
  const double c = (size - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < size; ++i) sum += g[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
  for (auto& v : g) v /= sum;
  return g;
}

// Separable valid-region filtering of an H x W plane.
inline std::vector<double> filter_valid(const double* p, int H, int W,
                                        const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int Ho = H - k + 1, Wo = W - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(H) * Wo), out(static_cast<std::size_t>(Ho) * Wo);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < Wo; ++x) {
      double s = 0;
      for (int t = 0; t < k; ++t) s += g[t] * p[y * W + x + t];
      tmp[y * Wo + x] = s;
    }
  for (int y = 0; y < Ho; ++y)
    for (int x = 0; x < Wo; ++x) {
      double s = 0;
      for (int t = 0; t < k; ++t) s += g[t] * tmp[(y + t) * Wo + x];
      out[y * Wo + x] = s;
    }
  return out;
}

}  // namespace detail

// Gaussian-window SSIM over the valid region, averaged over channels and
// samples; data range 1.
inline double ssim(const Tensor<double>& a, const Tensor<double>& b, const SsimConfig& cfg = {}) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.h() < cfg.window || a.w() < cfg.window) {
    throw InvalidInput("ssim: image smaller than the " + std::to_string(cfg.window) + "px window");
  }
  const auto g = detail::gaussian_taps(cfg.window, cfg.sigma);
  const double c1 = cfg.k1 * cfg.k1, c2 = cfg.k2 * cfg.k2;
  const int H = a.h(), W = a.w();
  const std::size_t P = a.shape().plane();
  double total = 0;
  int planes = 0;
  std::vector<double> xx(P), yy(P), xy(P);
  for (int n = 0; n < a.n(); ++n) {
    for (int c = 0; c < a.c(); ++c) {
      const double* x = a.plane(n, c);
      const double* y = b.plane(n, c);
      for (std::size_t i = 0; i < P; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
      const auto mx = detail::filter_valid(x, H, W, g);
      const auto my = detail::filter_valid(y, H, W, g);
      const auto sxx = detail::filter_valid(xx.data(), H, W, g);
      const auto syy = detail::filter_valid(yy.data(), H, W, g);
      const auto sxy = detail::filter_valid(xy.data(), H, W, g);
      double acc = 0;
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cxy = sxy[i] - mx[i] * my[i];
        acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      }
      total += acc / static_cast<double>(mx.size());
      ++planes;
    }
  }
  return total / planes;
}

// ---------------------------------------------------------------------------
// Canny.

struct CannyConfig {
  double sigma = 1.0;
  // Hysteresis thresholds on the unnormalised Sobel magnitude (taps 1-2-1)
  // of the smoothed [0, 1] gray image.
  double low = 0.1;
  double high = 0.2;
};

// Binary edge map (1 = edge) of a single-channel (1,1,H,W) image.
inline std::vector<std::uint8_t> canny(const Tensor<double>& gray, const CannyConfig& cfg = {}) {
  if (gray.n() != 1 || gray.c() != 1) throw InvalidInput("canny expects (1,1,H,W)");
  if (cfg.low > cfg.high) throw ConfigError("canny: low threshold above high threshold");
  const int H = gray.h(), W = gray.w();
  if (H < 3 || W < 3) throw InvalidInput("canny: image smaller than 3x3");
  // Half-sample symmetric border.
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  const int r = std::max(1, static_cast<int>(std::ceil(4 * cfg.sigma)));
  std::vector<double> g(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += g[i + r] = std::exp(-i * i / (2 * cfg.sigma * cfg.sigma));
  for (auto& v : g) v /= sum;

  const double* src = gray.data();
  std::vector<double> tmp(static_cast<std::size_t>(H) * W), sm(tmp.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double s = 0;
      for (int t = -r; t <= r; ++t) s += g[t + r] * src[y * W + reflect(x + t, W)];
      tmp[y * W + x] = s;
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double s = 0;
      for (int t = -r; t <= r; ++t) s += g[t + r] * tmp[reflect(y + t, H) * W + x];
      sm[y * W + x] = s;
    }

  std::vector<double> gx(sm.size()), gy(sm.size()), mag(sm.size());
  auto at = [&](int y, int x) { return sm[reflect(y, H) * W + reflect(x, W)]; };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double dx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const double dy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      gx[i] = dx;
      gy[i] = dy;
      mag[i] = std::hypot(dx, dy);
    }

  // Non-maximum suppression along the gradient direction quantised to 45
  // degrees; ties keep the pixel on the negative side only. The one-pixel
  // border never carries an edge.
  std::vector<double> nms(sm.size(), 0.0);
  for (int y = 1; y < H - 1; ++y)
    for (int x = 1; x < W - 1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const double m = mag[i];
      if (m <= 0) continue;
      double angle = std::atan2(gy[i], gx[i]) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      int oy = 0, ox = 0;
      if (angle < 22.5 || angle >= 157.5) ox = 1;
      else if (angle < 67.5) oy = ox = 1;
      else if (angle < 112.5) oy = 1;
      else { oy = 1; ox = -1; }
      const double before = mag[(y - oy) * W + (x - ox)];
      const double after = mag[(y + oy) * W + (x + ox)];
      if (m > before && m >= after) nms[i] = m;
    }

  std::vector<std::uint8_t> edges(sm.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < nms.size(); ++i) {
    if (nms[i] >= cfg.high && nms[i] > 0) {
      edges[i] = 1;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const int y = static_cast<int>(i / W), x = static_cast<int>(i % W);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
        const std::size_t j = static_cast<std::size_t>(yy) * W + xx;
        if (!edges[j] && nms[j] >= cfg.low && nms[j] > 0) {
          edges[j] = 1;
          queue.push_back(j);
        }
      }
  }
  return edges;
}

// (1,3,H,W) in [0, 1] -> (1,1,H,W) using the LBP gray coefficients.
inline Tensor<double> unit_gray(const Tensor<double>& rgb) {
  if (rgb.n() != 1 || rgb.c() != 3) throw InvalidInput("expected (1,3,H,W)");
  Tensor<double> g(1, 1, rgb.h(), rgb.w());
  for (std::size_t p = 0; p < g.size(); ++p) {
    g[p] = kGrayCoefficients[0] * rgb.plane(0, 0)[p] + kGrayCoefficients[1] * rgb.plane(0, 1)[p] +
           kGrayCoefficients[2] * rgb.plane(0, 2)[p];
  }
  return g;
}

struct EdgeReport {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

// Canny(I) as labels, Canny(O) as predictions, counted on hole pixels only.
// Ratios with a zero denominator are reported as 0.
inline EdgeReport edge_metrics(const Tensor<double>& o, const Tensor<double>& i,
                               const Tensor<double>& mask, const CannyConfig& cfg = {}) {
  require_same_shape(o.shape(), i.shape(), "edge_metrics");
  if (mask.n() != 1 || mask.c() != 1 || mask.h() != o.h() || mask.w() != o.w()) {
    throw InvalidInput("edge_metrics: mask shape " + mask.shape().str());
  }
  const auto pred = canny(unit_gray(o), cfg);
  const auto gt = canny(unit_gray(i), cfg);
  EdgeReport r;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (mask[p] != 0.0) continue;
    if (gt[p]) (pred[p] ? r.tp : r.fn)++;
    else (pred[p] ? r.fp : r.tn)++;
  }
  const std::int64_t total = r.tp + r.fp + r.tn + r.fn;
  if (total == 0) throw InvalidInput("edge metrics undefined: mask has no hole pixels");
  auto ratio = [](std::int64_t a, std::int64_t b) { return b == 0 ? 0.0 : double(a) / double(b); };
  r.accuracy = ratio(r.tp + r.tn, total);
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.f1 = r.precision + r.recall > 0
             ? 2 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Dataset evaluation.

struct ItemMetrics {
  std::size_t index = 0;
  MaskBin bin = MaskBin::other;
  double hole_ratio = 0;
  double mae = 0;
  double psnr = 0;
  double ssim = 0;
};

struct BinSummary {
  std::size_t count = 0;
  double mae = 0;
  double psnr = 0;
  double ssim = 0;
};

struct MetricsReport {
  std::map<MaskBin, BinSummary> bins;
  std::vector<ItemMetrics> items;
};

inline nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

// Per-bin means recomputed from the item list in index order.
inline std::map<MaskBin, BinSummary> summarize(const std::vector<ItemMetrics>& items) {
  std::map<MaskBin, BinSummary> out;
  for (const auto& it : items) {
    auto& s = out[it.bin];
    ++s.count;
    s.mae += it.mae;
    s.psnr += it.psnr;
    s.ssim += it.ssim;
  }
  for (auto& [bin, s] : out) {
    s.mae /= s.count;
    s.psnr /= s.count;
    s.ssim /= s.count;
  }
  return out;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json bins = nlohmann::json::object();
  for (const auto& [bin, s] : r.bins) {
    bins[to_string(bin)] = {{"count", s.count},
                            {"mae", json_number(s.mae)},
                            {"psnr", json_number(s.psnr)},
                            {"ssim", json_number(s.ssim)}};
  }
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) {
    items.push_back({{"index", it.index},
                     {"bin", to_string(it.bin)},
                     {"hole_ratio", it.hole_ratio},
                     {"mae", json_number(it.mae)},
                     {"psnr", json_number(it.psnr)},
                     {"ssim", json_number(it.ssim)}});
  }
  return {{"bins", bins}, {"items", items}};
}

inline std::string to_csv(const MetricsReport& r) {
  std::string s = "bin,count,mae,psnr,ssim\n";
  for (const auto& [bin, b] : r.bins) {
    s += fmt::format("{},{},{:.6f},{:.6f},{:.6f}\n", to_string(bin), b.count, b.mae, b.psnr,
                     b.ssim);
  }
  return s;
}

struct EvalConfig {
  std::vector<MaskBin> bins{kMaskBins.begin(), kMaskBins.end()};
  std::uint64_t seed = 0;
  // Known pixels are restored before scoring.
  bool composite = true;
  std::size_t limit = 0;  // 0 = whole dataset
};

// The free-form mask used for item `index` in `bin`.
inline Mask eval_mask(std::uint64_t seed, std::size_t index, MaskBin bin) {
  return gen_freeform(kImageSize, kImageSize, bin,
                      mix_seed({seed, index, static_cast<std::uint64_t>(bin)}));
}

template <typename T>
MetricsReport evaluate(const MultiGan<T>& nets, const Dataset& data, const EvalConfig& cfg) {
  const std::size_t n = cfg.limit ? std::min(cfg.limit, data.size()) : data.size();
  if (n == 0) throw InvalidInput("evaluation dataset is empty");
  MetricsReport r;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor<float> img = data.item(i);
    for (MaskBin bin : cfg.bins) {
      const Mask m = eval_mask(cfg.seed, i, bin);
      const Tensor<float> out = inpaint(nets, img.cast<T>(), m.tensor().cast<T>(), cfg.composite)
                                    .template cast<float>();
      const auto o = to_unit(out), g = to_unit(img);
      r.items.push_back({i, bin, m.hole_ratio(), mae(o, g), psnr(o, g), ssim(o, g)});
    }
  }
  r.bins = summarize(r.items);
  return r;
}

// ---------------------------------------------------------------------------
// Latency.

struct BenchReport {
  int iters = 0;
  double mean_ms = 0, p95_ms = 0, min_ms = 0, max_ms = 0;
  std::vector<double> samples_ms;
};

inline BenchReport summarize_latency(std::vector<double> samples) {
  if (samples.empty()) throw InvalidInput("no latency samples");
  BenchReport r;
  r.iters = static_cast<int>(samples.size());
  r.samples_ms = samples;
  std::sort(samples.begin(), samples.end());
  r.min_ms = samples.front();
  r.max_ms = samples.back();
  r.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * samples.size()));
  r.p95_ms = samples[std::max<std::size_t>(rank, 1) - 1];
  return r;
}

// Times `iters` full 256 pyramid inferences on a fixed random input after
// `warmup` untimed runs.
template <typename T>
BenchReport bench(const MultiGan<T>& nets, int iters = 100, int warmup = 2) {
  if (iters < 1) throw InvalidInput("bench: iters must be >= 1");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor<T> img(1, 3, kImageSize, kImageSize);
  for (auto& v : img.values()) v = u(rng);
  const Tensor<T> mask = gen_freeform(kImageSize, kImageSize, MaskBin::r30_40, 1).tensor().cast<T>();
  for (int i = 0; i < warmup; ++i) inpaint(nets, img, mask, true);
  std::vector<double> s;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    inpaint(nets, img, mask, true);
    s.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count());
  }
  return summarize_latency(std::move(s));
}

}  // namespace tamgan

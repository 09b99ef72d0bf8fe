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

// Hole masks (1 = known pixel, 0 = hole): free-form brush strokes, single
// rectangles, left/right outpainting bands, and hole-ratio bins.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "tamgan/tensor.hpp"

namespace tamgan {

enum class MaskBin { r10_20, r20_30, r30_40, r40_50, other };

inline const char* to_string(MaskBin b) {
  switch (b) {
    case MaskBin::r10_20: return "10-20";
    case MaskBin::r20_30: return "20-30";
    case MaskBin::r30_40: return "30-40";
    case MaskBin::r40_50: return "40-50";
    case MaskBin::other: return "other";
  }
  return "?";
}

inline MaskBin parse_mask_bin(const std::string& s) {
  for (MaskBin b : {MaskBin::r10_20, MaskBin::r20_30, MaskBin::r30_40,
                    MaskBin::r40_50, MaskBin::other}) {
    if (s == to_string(b)) return b;
  }
  throw InvalidInput("unknown mask bin '" + s + "' (expected 10-20, 20-30, 30-40 or 40-50)");
}

inline constexpr std::array<MaskBin, 4> kMaskBins{MaskBin::r10_20, MaskBin::r20_30,
                                                  MaskBin::r30_40, MaskBin::r40_50};

// Half-open [lo, hi); the 40-50 bin also admits exactly 0.5.
inline std::pair<double, double> bin_bounds(MaskBin b) {
  switch (b) {
    case MaskBin::r10_20: return {0.1, 0.2};
    case MaskBin::r20_30: return {0.2, 0.3};
    case MaskBin::r30_40: return {0.3, 0.4};
    case MaskBin::r40_50: return {0.4, 0.5};
    case MaskBin::other: break;
  }
  throw InvalidInput("the 'other' bin has no bounds");
}

inline MaskBin classify_ratio(double ratio) {
  if (ratio >= 0.1 && ratio < 0.2) return MaskBin::r10_20;
  if (ratio >= 0.2 && ratio < 0.3) return MaskBin::r20_30;
  if (ratio >= 0.3 && ratio < 0.4) return MaskBin::r30_40;
  if (ratio >= 0.4 && ratio <= 0.5) return MaskBin::r40_50;
  return MaskBin::other;
}

// Strictly binary single-channel grid with at least one known pixel.
class Mask {
 public:
  // All-known mask.
  Mask(int height, int width) : grid_(1, 1, height, width, 1.0f) {
    if (height <= 0 || width <= 0) throw InvalidInput("mask dimensions must be positive");
  }

  // Validates binarity and the known-pixel requirement.
  explicit Mask(Tensor<float> grid) : grid_(std::move(grid)) {
    if (grid_.n() != 1 || grid_.c() != 1) {
      throw InvalidInput("mask must be (1,1,H,W), got " + grid_.shape().str());
    }
    bool any_known = false;
    for (float v : grid_.values()) {
      if (v != 0.0f && v != 1.0f) throw InvalidInput("mask is not binary");
      any_known = any_known || v == 1.0f;
    }
    if (!any_known) throw InvalidInput("mask has no known pixel");
  }

  int height() const { return grid_.h(); }
  int width() const { return grid_.w(); }
  const Tensor<float>& tensor() const { return grid_; }

  bool known(int y, int x) const { return grid_.at(0, 0, y, x) == 1.0f; }

  std::int64_t hole_count() const {
    std::int64_t n = 0;
    for (float v : grid_.values()) n += v == 0.0f;
    return n;
  }

  double hole_ratio() const {
    return static_cast<double>(hole_count()) / static_cast<double>(grid_.size());
  }

  bool operator==(const Mask&) const = default;

 private:
  Tensor<float> grid_;
};

inline MaskBin classify(const Mask& m) { return classify_ratio(m.hole_ratio()); }

// Mutable drawing surface used by the generators.
class MaskCanvas {
 public:
  MaskCanvas(int h, int w) : grid_(1, 1, h, w, 1.0f), holes_(0) {}

  int height() const { return grid_.h(); }
  int width() const { return grid_.w(); }
  double hole_ratio() const { return static_cast<double>(holes_) / grid_.size(); }

  void clear() {
    grid_.fill(1.0f);
    holes_ = 0;
  }

  void punch(int y, int x) {
    if (y < 0 || x < 0 || y >= grid_.h() || x >= grid_.w()) return;
    float& v = grid_.at(0, 0, y, x);
    if (v == 1.0f) {
      v = 0.0f;
      ++holes_;
    }
  }

  void disc(double cy, double cx, double radius) {
    const int y0 = static_cast<int>(std::floor(cy - radius));
    const int y1 = static_cast<int>(std::ceil(cy + radius));
    const int x0 = static_cast<int>(std::floor(cx - radius));
    const int x1 = static_cast<int>(std::ceil(cx + radius));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dy = y - cy, dx = x - cx;
        if (dy * dy + dx * dx <= r2) punch(y, x);
      }
    }
  }

  // Round-brush segment.
  void line(double y0, double x0, double y1, double x1, double thickness) {
    const double len = std::hypot(y1 - y0, x1 - x0);
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    const double r = std::max(0.5, thickness / 2.0);
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      disc(y0 + t * (y1 - y0), x0 + t * (x1 - x0), r);
    }
  }

  void rect(int y, int x, int h, int w) {
    for (int yy = y; yy < y + h; ++yy) {
      for (int xx = x; xx < x + w; ++xx) punch(yy, xx);
    }
  }

  Mask finish() const { return Mask(grid_); }

 private:
  Tensor<float> grid_;
  std::int64_t holes_;
};

struct FreeformParams {
  int min_vertices = 1;
  int max_vertices = 12;
  // Brush thickness and segment length in pixels at 256x256; scaled with
  // min(H, W) / 256.
  double min_thickness = 5;
  double max_thickness = 40;
  double min_segment = 10;
  double max_segment = 60;
  int max_attempts = 2000;
};

// Random brush strokes drawn as holes until the hole ratio lands in
// `target`; attempts that overshoot restart from a clean canvas.
inline Mask gen_freeform(int height, int width, MaskBin target, std::uint64_t seed,
                         const FreeformParams& p = {}) {
  if (height < 32 || width < 32) {
    throw InvalidInput("free-form masks need H, W >= 32");
  }
  const double lo = bin_bounds(target).first;
  std::mt19937_64 rng(seed);
  const double scale = std::min(height, width) / 256.0;
  std::uniform_int_distribution<int> vertices(p.min_vertices, p.max_vertices);
  std::uniform_real_distribution<double> thick(p.min_thickness * scale,
                                               p.max_thickness * scale);
  std::uniform_real_distribution<double> seg(p.min_segment * scale, p.max_segment * scale);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> py(0.0, height - 1.0);
  std::uniform_real_distribution<double> px(0.0, width - 1.0);

  MaskCanvas canvas(height, width);
  for (int attempt = 0; attempt < p.max_attempts; ++attempt) {
    canvas.clear();
    while (canvas.hole_ratio() < lo) {
      double y = py(rng), x = px(rng);
      const double t = thick(rng);
      const int nv = vertices(rng);
      for (int v = 0; v < nv; ++v) {
        const double a = angle(rng);
        const double l = seg(rng);
        const double ny = std::clamp(y + l * std::sin(a), 0.0, height - 1.0);
        const double nx = std::clamp(x + l * std::cos(a), 0.0, width - 1.0);
        canvas.line(y, x, ny, nx, t);
        y = ny;
        x = nx;
      }
    }
    if (classify_ratio(canvas.hole_ratio()) == target) return canvas.finish();
  }
  throw GenerationError("could not reach hole-ratio bin " + std::string(to_string(target)) +
                        " for a " + std::to_string(height) + "x" + std::to_string(width) +
                        " mask");
}

// One axis-aligned rectangular hole, sides uniform in [H/4, H/2] x [W/4, W/2],
// placed uniformly inside the image.
inline Mask gen_block(int height, int width, std::uint64_t seed) {
  if (height < 4 || width < 4) throw InvalidInput("block masks need H, W >= 4");
  std::mt19937_64 rng(seed);
  const int h = std::uniform_int_distribution<int>(height / 4, height / 2)(rng);
  const int w = std::uniform_int_distribution<int>(width / 4, width / 2)(rng);
  const int y = std::uniform_int_distribution<int>(0, height - h)(rng);
  const int x = std::uniform_int_distribution<int>(0, width - w)(rng);
  MaskCanvas canvas(height, width);
  canvas.rect(y, x, h, w);
  return canvas.finish();
}

// Columns [0, W/4) and [3W/4, W) are holes (integer division).
inline Mask gen_outpaint(int height, int width) {
  if (height < 1 || width < 4) throw InvalidInput("outpaint masks need W >= 4");
  MaskCanvas canvas(height, width);
  canvas.rect(0, 0, height, width / 4);
  canvas.rect(0, 3 * width / 4, height, width - 3 * width / 4);
  return canvas.finish();
}

}  // namespace tamgan

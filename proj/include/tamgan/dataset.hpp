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

// Training/evaluation image sources. Every item is (1,3,256,256) in [-1, 1].

#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tamgan/image_io.hpp"
#include "tamgan/ops.hpp"

namespace tamgan {

inline constexpr int kImageSize = 256;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = splitmix64(h ^ p);
  return h;
}

// Procedural colour texture: two blended periodic patterns plus mild noise.
inline Tensor<float> synthetic_texture(std::uint64_t seed, int size = kImageSize) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double pi = std::numbers::pi;

  std::array<double, 3> c0, c1;
  for (auto& v : c0) v = u(rng);
  for (auto& v : c1) v = u(rng);

  struct Pattern {
    int kind;
    double freq, angle, phase, warp;
  };
  auto draw = [&] {
    return Pattern{static_cast<int>(u(rng) * 4), 2 + u(rng) * 14, u(rng) * pi, u(rng) * 2 * pi,
                   u(rng) * 0.8};
  };
  const Pattern a = draw(), b = draw();
  const double blend = 0.15 + 0.35 * u(rng);
  const double noise = 0.02 + 0.05 * u(rng);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto eval = [&](const Pattern& p, double y, double x) {
    const double ca = std::cos(p.angle), sa = std::sin(p.angle);
    const double s = x * ca + y * sa, t = -x * sa + y * ca;
    const double w = p.warp * std::sin(2 * pi * 1.5 * t);
    switch (p.kind) {
      case 0:  // stripes
        return 0.5 + 0.5 * std::sin(2 * pi * p.freq * s + w + p.phase);
      case 1:  // checks
        return (std::sin(2 * pi * p.freq * s + p.phase) * std::sin(2 * pi * p.freq * t) > 0) ? 1.0
                                                                                             : 0.0;
      case 2: {  // rings
        const double r = std::hypot(x - 0.5, y - 0.5);
        return 0.5 + 0.5 * std::sin(2 * pi * p.freq * r + w + p.phase);
      }
      default: {  // dots
        const double fs = p.freq * s, ft = p.freq * t;
        const double ds = fs - std::floor(fs) - 0.5, dt = ft - std::floor(ft) - 0.5;
        return std::hypot(ds, dt) < 0.3 ? 1.0 : 0.0;
      }
    }
  };

  Tensor<float> img(1, 3, size, size);
  for (int yy = 0; yy < size; ++yy) {
    for (int xx = 0; xx < size; ++xx) {
      const double y = (yy + 0.5) / size, x = (xx + 0.5) / size;
      double v = (1 - blend) * eval(a, y, x) + blend * eval(b, y, x);
      v = std::clamp(v + noise * gauss(rng), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double px = c0[c] + (c1[c] - c0[c]) * v;
        img.at(0, c, yy, xx) = static_cast<float>(2 * px - 1);
      }
    }
  }
  return img;
}

// Centre-crops to a square, then area-resamples to 256x256.
inline Tensor<float> normalize_to_model_size(const Tensor<float>& rgb) {
  const int side = std::min(rgb.h(), rgb.w());
  const int y0 = (rgb.h() - side) / 2, x0 = (rgb.w() - side) / 2;
  Tensor<float> sq(1, 3, side, side);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) sq.at(0, c, y, x) = rgb.at(0, c, y0 + y, x0 + x);
  if (side == kImageSize) return sq;
  return side > kImageSize ? resize_area(sq, kImageSize, kImageSize)
                           : resize_bilinear(sq, kImageSize, kImageSize);
}

class Dataset {
 public:
  enum class Kind { synthetic, folder };

  static Dataset synthetic(std::size_t count, std::uint64_t seed) {
    Dataset d;
    d.kind_ = Kind::synthetic;
    d.count_ = count;
    d.seed_ = seed;
    d.cache_.resize(count);
    return d;
  }

  // Recursively indexes *.png under root/<split> (or root itself when that
  // subdirectory does not exist), in sorted path order.
  static Dataset folder(const std::filesystem::path& root, const std::string& split = "train") {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
    fs::path dir = root / split;
    if (!fs::is_directory(dir)) dir = root;
    Dataset d;
    d.kind_ = Kind::folder;
    d.root_ = dir;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext != ".png") {
        spdlog::info("dataset: skipping non-PNG file {}", e.path().string());
        continue;
      }
      d.files_.push_back(e.path());
    }
    std::sort(d.files_.begin(), d.files_.end());
    d.count_ = d.files_.size();
    d.cache_.resize(d.count_);
    if (d.count_ == 0) spdlog::warn("dataset: no PNG images under {}", dir.string());
    return d;
  }

  Dataset(const Dataset& o) : kind_(o.kind_), count_(o.count_), seed_(o.seed_),
                              root_(o.root_), files_(o.files_), cache_(o.count_) {}
  Dataset(Dataset&&) = default;

  Kind kind() const { return kind_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  const std::vector<std::filesystem::path>& files() const { return files_; }

  Tensor<float> item(std::size_t i) const {
    if (i >= count_) throw InvalidInput("dataset index out of range");
    {
      std::lock_guard<std::mutex> lock(*mutex_);
      if (cache_[i]) return *cache_[i];
    }
    Tensor<float> t = kind_ == Kind::synthetic
                          ? synthetic_texture(mix_seed({seed_, i}))
                          : normalize_to_model_size(image_to_tensor(read_png(files_[i])));
    std::lock_guard<std::mutex> lock(*mutex_);
    if (cached_bytes_ + t.size() * sizeof(float) <= kCacheBudget) {
      cached_bytes_ += t.size() * sizeof(float);
      cache_[i] = t;
    }
    return t;
  }

  Tensor<float> batch(const std::vector<std::size_t>& indices) const {
    Tensor<float> out(static_cast<int>(indices.size()), 3, kImageSize, kImageSize);
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const Tensor<float> t = item(indices[b]);
      std::copy(t.data(), t.data() + t.size(), out.sample(static_cast<int>(b)));
    }
    return out;
  }

  std::string describe() const {
    if (kind_ == Kind::synthetic) {
      return "synthetic(" + std::to_string(count_) + ", seed " + std::to_string(seed_) + ")";
    }
    return "folder(" + root_.string() + ", " + std::to_string(count_) + " images)";
  }

 private:
  Dataset() = default;
  static constexpr std::size_t kCacheBudget = std::size_t{1} << 30;

  Kind kind_ = Kind::synthetic;
  std::size_t count_ = 0;
  std::uint64_t seed_ = 0;
  std::filesystem::path root_;
  std::vector<std::filesystem::path> files_;
  mutable std::vector<std::optional<Tensor<float>>> cache_;
  mutable std::size_t cached_bytes_ = 0;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace tamgan

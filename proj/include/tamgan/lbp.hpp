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

// Local binary patterns.
//
// Two operators share one neighbour ordering:
//  * lbp_exact: the classic 8-neighbour code, bit i set when neighbour i is
//    strictly greater than the centre. Not differentiable.
//  * LbpLayer / lbp_surrogate: eight fixed 3x3 difference kernels (centre -1,
//    one neighbour +1), ReLU, weighted by 2^i, summed and divided by 255.
//    Piecewise linear in the input, no learnable parameters.
//
// On inputs whose neighbour differences lie in {-1, 0, 1} the two agree up to
// the factor 255. On general grey inputs the surrogate weights the magnitude
// of every positive difference, so it is not a thresholded code.

#pragma once

#include <array>
#include <cmath>
#include <string>

#include "tamgan/ops.hpp"
#include "tamgan/tensor.hpp"

namespace tamgan {

// Row-major 3x3 neighbour order TL, T, TR, L, R, BL, B, BR; neighbour i
// carries weight 2^i.
inline constexpr std::array<std::array<int, 2>, 8> kLbpNeighbors{{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

inline constexpr std::array<double, 8> kLbpCodes{1, 2, 4, 8, 16, 32, 64, 128};

inline constexpr std::array<double, 3> kGrayCoefficients{0.299, 0.587, 0.110};

struct LbpConfig {
  int dilation = 1;
  // Exact operator only: treat neighbour == centre as a set bit.
  bool ties_as_one = false;

  int margin() const { return dilation; }
};

inline void validate_lbp_input(const Shape& s, const LbpConfig& cfg,
                               const char* what) {
  if (cfg.dilation < 1) {
    throw InvalidInput(std::string(what) + ": dilation must be >= 1");
  }
  if (s.c != 1) {
    throw InvalidInput(std::string(what) + ": expected one grey channel, got " +
                       std::to_string(s.c));
  }
  const int need = 2 * cfg.dilation + 1;
  if (s.h < need || s.w < need) {
    throw InvalidInput(std::string(what) + ": image " + s.str() +
                       " smaller than the dilated 3x3 window (" +
                       std::to_string(need) + ")");
  }
}

// Grey = 0.299 r + 0.587 g + 0.110 b. The coefficients sum to 0.996 and are
// intentionally not renormalised.
template <typename T>
Tensor<T> to_gray(const Tensor<T>& rgb) {
  if (rgb.c() != 3) {
    throw InvalidInput("to_gray: expected 3 channels, got " +
                       std::to_string(rgb.c()));
  }
  Tensor<T> g(rgb.n(), 1, rgb.h(), rgb.w());
  const std::size_t P = rgb.shape().plane();
  for (int n = 0; n < rgb.n(); ++n) {
    const T* r = rgb.plane(n, 0);
    const T* gr = rgb.plane(n, 1);
    const T* b = rgb.plane(n, 2);
    T* o = g.plane(n, 0);
    for (std::size_t i = 0; i < P; ++i) {
      o[i] = static_cast<T>(kGrayCoefficients[0]) * r[i] +
             static_cast<T>(kGrayCoefficients[1]) * gr[i] +
             static_cast<T>(kGrayCoefficients[2]) * b[i];
    }
  }
  return g;
}

template <typename T>
Tensor<T> to_gray_backward(const Tensor<T>& dgray) {
  Tensor<T> d(dgray.n(), 3, dgray.h(), dgray.w());
  const std::size_t P = dgray.shape().plane();
  for (int n = 0; n < dgray.n(); ++n) {
    const T* g = dgray.plane(n, 0);
    for (int c = 0; c < 3; ++c) {
      T* o = d.plane(n, c);
      const T k = static_cast<T>(kGrayCoefficients[c]);
      for (std::size_t i = 0; i < P; ++i) o[i] = k * g[i];
    }
  }
  return d;
}

// Network range [-1, 1] -> byte range [0, 255].
template <typename T>
Tensor<T> to_byte_range(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.values()) v = (v + T{1}) * static_cast<T>(127.5);
  return out;
}

template <typename T>
Tensor<T> lbp_exact(const Tensor<T>& gray, const LbpConfig& cfg = {}) {
  validate_lbp_input(gray.shape(), cfg, "lbp_exact");
  const int d = cfg.dilation;
  const int Ho = gray.h() - 2 * d, Wo = gray.w() - 2 * d;
  Tensor<T> out(gray.n(), 1, Ho, Wo);
  for (int n = 0; n < gray.n(); ++n) {
    for (int y = 0; y < Ho; ++y) {
      for (int x = 0; x < Wo; ++x) {
        const T c = gray.at(n, 0, y + d, x + d);
        int code = 0;
        for (int i = 0; i < 8; ++i) {
          const T v = gray.at(n, 0, y + d + kLbpNeighbors[i][0] * d,
                              x + d + kLbpNeighbors[i][1] * d);
          const bool bit = cfg.ties_as_one ? v >= c : v > c;
          if (bit) code |= 1 << i;
        }
        out.at(n, 0, y, x) = static_cast<T>(code);
      }
    }
  }
  return out;
}

// Differentiable LBP surrogate built from a fixed-weight convolution.
template <typename T>
class LbpLayer {
 public:
  explicit LbpLayer(LbpConfig cfg = {})
      : cfg_(cfg), kernels_(8, 1, 3, 3), geometry_{3, 1, 0, cfg.dilation} {
    for (int i = 0; i < 8; ++i) {
      kernels_.at(i, 0, 1, 1) = T{-1};
      kernels_.at(i, 0, 1 + kLbpNeighbors[i][0], 1 + kLbpNeighbors[i][1]) = T{1};
    }
  }

  const LbpConfig& config() const { return cfg_; }
  const Tensor<T>& kernels() const { return kernels_; }
  // The layer has no trainable state.
  static constexpr std::size_t parameter_count() { return 0; }

  Tensor<T> forward(const Tensor<T>& gray) const {
    validate_lbp_input(gray.shape(), cfg_, "lbp_surrogate");
    Tensor<T> diffs = conv2d(gray, kernels_, Tensor<T>{}, geometry_);
    activate_inplace(diffs, Activation::relu);
    return combine(diffs);
  }

  // dL/dgray for upstream gradient dlbp at input `gray`.
  Tensor<T> backward(const Tensor<T>& gray, const Tensor<T>& dlbp) const {
    validate_lbp_input(gray.shape(), cfg_, "lbp_surrogate");
    Tensor<T> diffs = conv2d(gray, kernels_, Tensor<T>{}, geometry_);
    require_same_shape(dlbp.shape(),
                       Shape{gray.n(), 1, diffs.h(), diffs.w()},
                       "lbp_surrogate backward");
    Tensor<T> ddiffs(diffs.shape());
    const std::size_t P = diffs.shape().plane();
    for (int n = 0; n < diffs.n(); ++n) {
      const T* g = dlbp.plane(n, 0);
      for (int i = 0; i < 8; ++i) {
        const T scale = static_cast<T>(kLbpCodes[i] / 255.0);
        const T* pre = diffs.plane(n, i);
        T* o = ddiffs.plane(n, i);
        for (std::size_t p = 0; p < P; ++p) {
          o[p] = pre[p] > T{0} ? scale * g[p] : T{0};
        }
      }
    }
    return conv2d_backward<T>(gray, kernels_, ddiffs, geometry_, nullptr, nullptr,
                           true);
  }

 private:
  Tensor<T> combine(const Tensor<T>& rectified) const {
    Tensor<T> out(rectified.n(), 1, rectified.h(), rectified.w());
    const std::size_t P = rectified.shape().plane();
    for (int n = 0; n < rectified.n(); ++n) {
      T* o = out.plane(n, 0);
      for (int i = 0; i < 8; ++i) {
        const T code = static_cast<T>(kLbpCodes[i]);
        const T* r = rectified.plane(n, i);
        for (std::size_t p = 0; p < P; ++p) o[p] += r[p] * code;
      }
      for (std::size_t p = 0; p < P; ++p) o[p] /= T{255};
    }
    return out;
  }

  LbpConfig cfg_;
  Tensor<T> kernels_;
  ConvGeometry geometry_;
};

template <typename T>
Tensor<T> lbp_surrogate(const Tensor<T>& gray, const LbpConfig& cfg = {}) {
  return LbpLayer<T>(cfg).forward(gray);
}

template <typename T>
Tensor<T> lbp_surrogate_backward(const Tensor<T>& gray, const Tensor<T>& dlbp,
                                 const LbpConfig& cfg = {}) {
  return LbpLayer<T>(cfg).backward(gray, dlbp);
}

}  // namespace tamgan

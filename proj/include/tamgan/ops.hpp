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

// Convolution, transposed convolution, activations and resampling kernels.
//
// Convolutions lower to im2col + GEMM (Eigen). Every kernel has a forward and,
// where training needs it, a backward that accumulates parameter gradients and
// optionally produces the input gradient.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "tamgan/tensor.hpp"

namespace tamgan {

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  int dilation = 1;

  int out_size(int in) const {
    return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  }
  // Output extent of the transposed convolution with this geometry.
  int transposed_out_size(int in) const {
    return (in - 1) * stride - 2 * padding + dilation * (kernel - 1) + 1;
  }
};

enum class Activation { none, relu, leaky_relu, tanh };

inline constexpr double kLeakySlope = 0.2;

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// cols has shape (C*k*k, Ho*Wo).
template <typename T>
void im2col(const T* x, int C, int H, int W, const ConvGeometry& g, int Ho,
            int Wo, T* cols) {
  const int k = g.kernel;
  for (int c = 0; c < C; ++c) {
    const T* xp = x + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) *
                            static_cast<std::size_t>(Ho) * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          T* r = row + static_cast<std::size_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(r, r + Wo, T{0});
            continue;
          }
          const T* src = xp + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx * g.dilation;
            r[ox] = (ix >= 0 && ix < W) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* cols, int C, int H, int W, const ConvGeometry& g, int Ho,
            int Wo, T* x) {
  const int k = g.kernel;
  for (int c = 0; c < C; ++c) {
    T* xp = x + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) *
                                  static_cast<std::size_t>(Ho) * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          if (iy < 0 || iy >= H) continue;
          const T* r = row + static_cast<std::size_t>(oy) * Wo;
          T* dst = xp + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx * g.dilation;
            if (ix >= 0 && ix < W) dst[ix] += r[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// y = conv(x, weight) + bias. weight is (Cout, Cin, k, k); bias may be empty.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, const ConvGeometry& g) {
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int Cout = weight.n();
  if (weight.c() != C || weight.h() != g.kernel || weight.w() != g.kernel) {
    throw ShapeError("conv2d: weight " + weight.shape().str() +
                     " incompatible with input " + x.shape().str());
  }
  const int Ho = g.out_size(H), Wo = g.out_size(W);
  if (Ho <= 0 || Wo <= 0) {
    throw ShapeError("conv2d: input " + x.shape().str() + " too small");
  }
  const int K = C * g.kernel * g.kernel;
  const int P = Ho * Wo;
  Tensor<T> y(N, Cout, Ho, Wo);
  AlignedVector<T> cols(static_cast<std::size_t>(K) * P);
  detail::ConstMatMap<T> Wm(weight.data(), Cout, K);
  for (int n = 0; n < N; ++n) {
    detail::im2col(x.sample(n), C, H, W, g, Ho, Wo, cols.data());
    detail::ConstMatMap<T> Cm(cols.data(), K, P);
    detail::MatMap<T> Ym(y.sample(n), Cout, P);
    Ym.noalias() = Wm * Cm;
    if (!bias.empty()) {
      for (int o = 0; o < Cout; ++o) Ym.row(o).array() += bias[o];
    }
  }
  return y;
}

// Accumulates into grad_weight / grad_bias when non-null; returns dL/dx when
// want_input_grad, otherwise an empty tensor.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                          const Tensor<T>& dy, const ConvGeometry& g,
                          Tensor<T>* grad_weight, Tensor<T>* grad_bias,
                          bool want_input_grad) {
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int Cout = weight.n();
  const int Ho = dy.h(), Wo = dy.w();
  const int K = C * g.kernel * g.kernel;
  const int P = Ho * Wo;
  AlignedVector<T> cols(static_cast<std::size_t>(K) * P);
  Tensor<T> dx;
  if (want_input_grad) dx = Tensor<T>(x.shape());
  detail::ConstMatMap<T> Wm(weight.data(), Cout, K);
  for (int n = 0; n < N; ++n) {
    detail::ConstMatMap<T> Dm(dy.sample(n), Cout, P);
    if (grad_weight != nullptr) {
      detail::im2col(x.sample(n), C, H, W, g, Ho, Wo, cols.data());
      detail::ConstMatMap<T> Cm(cols.data(), K, P);
      detail::MatMap<T> Gw(grad_weight->data(), Cout, K);
      Gw.noalias() += Dm * Cm.transpose();
    }
    if (grad_bias != nullptr) {
      for (int o = 0; o < Cout; ++o) (*grad_bias)[o] += Dm.row(o).sum();
    }
    if (want_input_grad) {
      detail::MatMap<T> Cm(cols.data(), K, P);
      Cm.noalias() = Wm.transpose() * Dm;
      detail::col2im(cols.data(), C, H, W, g, Ho, Wo, dx.sample(n));
    }
  }
  return dx;
}

// Transposed convolution. weight is (Cin, Cout, k, k) as in PyTorch.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias, const ConvGeometry& g) {
  const int N = x.n(), Cin = x.c(), H = x.h(), W = x.w();
  if (weight.n() != Cin || weight.h() != g.kernel || weight.w() != g.kernel) {
    throw ShapeError("conv_transpose2d: weight " + weight.shape().str() +
                     " incompatible with input " + x.shape().str());
  }
  const int Cout = weight.c();
  const int Ho = g.transposed_out_size(H), Wo = g.transposed_out_size(W);
  const int K = Cout * g.kernel * g.kernel;
  const int P = H * W;
  Tensor<T> y(N, Cout, Ho, Wo);
  AlignedVector<T> cols(static_cast<std::size_t>(K) * P);
  detail::ConstMatMap<T> Wm(weight.data(), Cin, K);
  for (int n = 0; n < N; ++n) {
    detail::ConstMatMap<T> Xm(x.sample(n), Cin, P);
    detail::MatMap<T> Cm(cols.data(), K, P);
    Cm.noalias() = Wm.transpose() * Xm;
    detail::col2im(cols.data(), Cout, Ho, Wo, g, H, W, y.sample(n));
    if (!bias.empty()) {
      for (int o = 0; o < Cout; ++o) {
        T* p = y.plane(n, o);
        for (std::size_t i = 0; i < y.shape().plane(); ++i) p[i] += bias[o];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> conv_transpose2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                                    const Tensor<T>& dy, const ConvGeometry& g,
                                    Tensor<T>* grad_weight,
                                    Tensor<T>* grad_bias,
                                    bool want_input_grad) {
  const int N = x.n(), Cin = x.c(), H = x.h(), W = x.w();
  const int Cout = weight.c();
  const int Ho = dy.h(), Wo = dy.w();
  const int K = Cout * g.kernel * g.kernel;
  const int P = H * W;
  AlignedVector<T> cols(static_cast<std::size_t>(K) * P);
  Tensor<T> dx;
  if (want_input_grad) dx = Tensor<T>(x.shape());
  detail::ConstMatMap<T> Wm(weight.data(), Cin, K);
  for (int n = 0; n < N; ++n) {
    detail::im2col(dy.sample(n), Cout, Ho, Wo, g, H, W, cols.data());
    detail::ConstMatMap<T> Cm(cols.data(), K, P);
    if (grad_weight != nullptr) {
      detail::ConstMatMap<T> Xm(x.sample(n), Cin, P);
      detail::MatMap<T> Gw(grad_weight->data(), Cin, K);
      Gw.noalias() += Xm * Cm.transpose();
    }
    if (grad_bias != nullptr) {
      for (int o = 0; o < Cout; ++o) {
        const T* p = dy.plane(n, o);
        T s{0};
        for (std::size_t i = 0; i < dy.shape().plane(); ++i) s += p[i];
        (*grad_bias)[o] += s;
      }
    }
    if (want_input_grad) {
      detail::MatMap<T> Dx(dx.sample(n), Cin, P);
      Dx.noalias() = Wm * Cm;
    }
  }
  return dx;
}

template <typename T>
void activate_inplace(Tensor<T>& t, Activation a) {
  switch (a) {
    case Activation::none:
      return;
    case Activation::relu:
      for (auto& v : t.values()) v = v > T{0} ? v : T{0};
      return;
    case Activation::leaky_relu:
      for (auto& v : t.values()) v = v > T{0} ? v : static_cast<T>(kLeakySlope) * v;
      return;
    case Activation::tanh:
      for (auto& v : t.values()) v = std::tanh(v);
      return;
  }
}

// Gradient through an activation given its output y. The sign of y equals the
// sign of the pre-activation for every supported function.
template <typename T>
void activation_backward_inplace(Tensor<T>& dy, const Tensor<T>& y,
                                 Activation a) {
  auto d = dy.values();
  auto o = y.values();
  switch (a) {
    case Activation::none:
      return;
    case Activation::relu:
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(o[i] > T{0})) d[i] = T{0};
      }
      return;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(o[i] > T{0})) d[i] *= static_cast<T>(kLeakySlope);
      }
      return;
    case Activation::tanh:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= T{1} - o[i] * o[i];
      return;
  }
}

// Channel-wise concatenation; all inputs share N, H and W.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape s0 = parts.front()->shape();
  int C = 0;
  for (const auto* p : parts) {
    const Shape& s = p->shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw ShapeError("concat_channels: " + s.str() + " vs " + s0.str());
    }
    C += s.c;
  }
  Tensor<T> out(s0.n, C, s0.h, s0.w);
  for (int n = 0; n < s0.n; ++n) {
    T* dst = out.sample(n);
    for (const auto* p : parts) {
      const std::size_t len = p->shape().sample();
      std::copy(p->sample(n), p->sample(n) + len, dst);
      dst += len;
    }
  }
  return out;
}

// Inverse of concat_channels for gradients.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& t,
                                      const std::vector<int>& channels) {
  std::vector<Tensor<T>> out;
  out.reserve(channels.size());
  for (int c : channels) out.emplace_back(t.n(), c, t.h(), t.w());
  for (int n = 0; n < t.n(); ++n) {
    const T* src = t.sample(n);
    for (auto& o : out) {
      const std::size_t len = o.shape().sample();
      std::copy(src, src + len, o.sample(n));
      src += len;
    }
  }
  return out;
}

namespace detail {

struct Tap {
  int src;
  double weight;
};

// Box-filter taps for resampling `in` samples onto `out` samples, exact
// fractional coverage.
inline std::vector<std::vector<Tap>> area_taps(int in, int out) {
  std::vector<std::vector<Tap>> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < in && i < hi; ++i) {
      const double cover = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
      if (cover > 0) taps[o].push_back({i, cover / scale});
    }
  }
  return taps;
}

// Bilinear taps, half-pixel centers (align_corners = false).
inline std::vector<std::vector<Tap>> bilinear_taps(int in, int out) {
  std::vector<std::vector<Tap>> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const double f = src - i0;
    if (i1 == i0 || f == 0.0) {
      taps[o].push_back({i0, 1.0});
    } else {
      taps[o].push_back({i0, 1.0 - f});
      taps[o].push_back({i1, f});
    }
  }
  return taps;
}

template <typename T>
Tensor<T> separable_resample(const Tensor<T>& x, int H, int W,
                             const std::vector<std::vector<Tap>>& ty,
                             const std::vector<std::vector<Tap>>& tx) {
  Tensor<T> out(x.n(), x.c(), H, W);
  std::vector<double> rows(static_cast<std::size_t>(x.h()) * W);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.plane(n, c);
      for (int y = 0; y < x.h(); ++y) {
        for (int ox = 0; ox < W; ++ox) {
          double acc = 0;
          for (const Tap& t : tx[ox]) acc += t.weight * src[y * x.w() + t.src];
          rows[static_cast<std::size_t>(y) * W + ox] = acc;
        }
      }
      T* dst = out.plane(n, c);
      for (int oy = 0; oy < H; ++oy) {
        for (int ox = 0; ox < W; ++ox) {
          double acc = 0;
          for (const Tap& t : ty[oy]) {
            acc += t.weight * rows[static_cast<std::size_t>(t.src) * W + ox];
          }
          dst[oy * W + ox] = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

}  // namespace detail

// Area-averaging resize; exact block mean for integer downscale factors.
template <typename T>
Tensor<T> resize_area(const Tensor<T>& x, int H, int W) {
  if (H == x.h() && W == x.w()) return x;
  return detail::separable_resample(x, H, W, detail::area_taps(x.h(), H),
                                    detail::area_taps(x.w(), W));
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int H, int W) {
  if (H == x.h() && W == x.w()) return x;
  return detail::separable_resample(x, H, W, detail::bilinear_taps(x.h(), H),
                                    detail::bilinear_taps(x.w(), W));
}

// Nearest-neighbour resize (source index floor(dst * in / out)); keeps binary
// masks binary.
template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& x, int H, int W) {
  if (H == x.h() && W == x.w()) return x;
  Tensor<T> out(x.n(), x.c(), H, W);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (int y = 0; y < H; ++y) {
        const int sy = static_cast<int>(static_cast<long>(y) * x.h() / H);
        for (int xx = 0; xx < W; ++xx) {
          const int sx = static_cast<int>(static_cast<long>(xx) * x.w() / W);
          dst[y * W + xx] = src[sy * x.w() + sx];
        }
      }
    }
  }
  return out;
}

// Elementwise product with a single-channel mask broadcast over channels.
template <typename T>
Tensor<T> apply_mask(const Tensor<T>& image, const Tensor<T>& mask) {
  if (mask.c() != 1 || mask.n() != image.n() || mask.h() != image.h() ||
      mask.w() != image.w()) {
    throw InvalidInput("apply_mask: mask " + mask.shape().str() +
                       " does not match image " + image.shape().str());
  }
  Tensor<T> out = image;
  for (int n = 0; n < image.n(); ++n) {
    const T* m = mask.plane(n, 0);
    for (int c = 0; c < image.c(); ++c) {
      T* p = out.plane(n, c);
      for (std::size_t i = 0; i < image.shape().plane(); ++i) p[i] *= m[i];
    }
  }
  return out;
}

// out * (1 - M) + known * M.
template <typename T>
Tensor<T> composite(const Tensor<T>& generated, const Tensor<T>& known,
                    const Tensor<T>& mask) {
  require_same_shape(generated.shape(), known.shape(), "composite");
  Tensor<T> out = generated;
  for (int n = 0; n < out.n(); ++n) {
    const T* m = mask.plane(n, 0);
    for (int c = 0; c < out.c(); ++c) {
      T* p = out.plane(n, c);
      const T* k = known.plane(n, c);
      for (std::size_t i = 0; i < out.shape().plane(); ++i) {
        p[i] = m[i] > T{0.5} ? k[i] : p[i];
      }
    }
  }
  return out;
}

}  // namespace tamgan

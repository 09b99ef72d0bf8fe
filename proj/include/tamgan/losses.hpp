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

// Reconstruction (L1), LSGAN and LBP texture losses. Every norm and
// expectation is a mean so loss weights do not depend on resolution.

#pragma once

#include <cmath>
#include <optional>

#include "tamgan/lbp.hpp"
#include "tamgan/spec.hpp"
#include "tamgan/tensor.hpp"

namespace tamgan {

template <typename T>
struct LossAndGrad {
  T value{0};
  Tensor<T> grad;
};

template <typename T>
T l1_loss(const Tensor<T>& out, const Tensor<T>& target) {
  require_same_shape(out.shape(), target.shape(), "l1_loss");
  long double acc = 0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += std::abs(out[i] - target[i]);
  return static_cast<T>(acc / static_cast<long double>(out.size()));
}

// Subgradient sign(out - target) / N, zero at ties.
template <typename T>
LossAndGrad<T> l1_loss_with_grad(const Tensor<T>& out, const Tensor<T>& target) {
  LossAndGrad<T> r{l1_loss(out, target), Tensor<T>(out.shape())};
  const T inv = T{1} / static_cast<T>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T d = out[i] - target[i];
    r.grad[i] = d > T{0} ? inv : (d < T{0} ? -inv : T{0});
  }
  return r;
}

namespace detail {

template <typename T>
T mean_squared_offset(const Tensor<T>& x, T target) {
  long double acc = 0;
  for (T v : x.values()) acc += static_cast<long double>(v - target) * (v - target);
  return static_cast<T>(acc / static_cast<long double>(x.size()));
}

template <typename T>
Tensor<T> mean_squared_offset_grad(const Tensor<T>& x, T target) {
  Tensor<T> g(x.shape());
  const T k = T{2} / static_cast<T>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = k * (x[i] - target);
  return g;
}

}  // namespace detail

// Discriminator objective: mean[(D(I) - 1)^2] + mean[D(O)^2].
template <typename T>
T lsgan_d_loss(const Tensor<T>& real_scores, const Tensor<T>& fake_scores) {
  require_same_shape(real_scores.shape(), fake_scores.shape(), "lsgan_d_loss");
  return detail::mean_squared_offset(real_scores, T{1}) +
         detail::mean_squared_offset(fake_scores, T{0});
}

// Gradients of lsgan_d_loss with respect to the real and fake score maps.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> lsgan_d_loss_grads(const Tensor<T>& real_scores,
                                                   const Tensor<T>& fake_scores) {
  require_same_shape(real_scores.shape(), fake_scores.shape(), "lsgan_d_loss");
  return {detail::mean_squared_offset_grad(real_scores, T{1}),
          detail::mean_squared_offset_grad(fake_scores, T{0})};
}

// Generator adversarial objective: mean[(D(O) - 1)^2].
template <typename T>
T lsgan_g_loss(const Tensor<T>& fake_scores) {
  return detail::mean_squared_offset(fake_scores, T{1});
}

template <typename T>
LossAndGrad<T> lsgan_g_loss_with_grad(const Tensor<T>& fake_scores) {
  return {lsgan_g_loss(fake_scores), detail::mean_squared_offset_grad(fake_scores, T{1})};
}

// Mean |LBP(Gray(O)) - LBP(Gray(I))| over the cropped LBP grid, with both
// images mapped from [-1, 1] to [0, 255] first. Differentiable in `out`.
template <typename T>
LossAndGrad<T> texture_loss_with_grad(const Tensor<T>& out, const Tensor<T>& target,
                                      const LbpConfig& cfg = {}) {
  require_same_shape(out.shape(), target.shape(), "texture_loss");
  const LbpLayer<T> lbp(cfg);
  const Tensor<T> gray_out = to_gray(to_byte_range(out));
  const Tensor<T> lbp_out = lbp.forward(gray_out);
  const Tensor<T> lbp_target = lbp.forward(to_gray(to_byte_range(target)));
  LossAndGrad<T> l1 = l1_loss_with_grad(lbp_out, lbp_target);
  Tensor<T> dgray = lbp.backward(gray_out, l1.grad);
  Tensor<T> grad = to_gray_backward(dgray);
  for (auto& v : grad.values()) v *= static_cast<T>(127.5);
  return {l1.value, std::move(grad)};
}

template <typename T>
T texture_loss(const Tensor<T>& out, const Tensor<T>& target, const LbpConfig& cfg = {}) {
  require_same_shape(out.shape(), target.shape(), "texture_loss");
  const LbpLayer<T> lbp(cfg);
  return l1_loss(lbp.forward(to_gray(to_byte_range(out))),
                 lbp.forward(to_gray(to_byte_range(target))));
}

struct LossWeights {
  double adv = 0.1;
  double rec = 1.0;
  double texture = 10.0;

  void validate() const {
    if (adv < 0 || rec < 0 || texture < 0) {
      throw ConfigError("loss weights must be non-negative");
    }
  }
};

struct StageLosses {
  double l_rec = 0;
  double l_adv = 0;
  double l_dis = 0;
  // Only evaluated at the 256 stage.
  std::optional<double> l_texture;
  double l_overall = 0;
};

// Weighted sum of adversarial, reconstruction and (stage 256 only) texture
// terms.
inline double overall_loss(int stage, const StageLosses& l, const LossWeights& w) {
  stage_index(stage);
  w.validate();
  if (l.l_texture && stage != 256) {
    throw InvalidInput("texture loss is only defined at stage 256, got stage " +
                       std::to_string(stage));
  }
  return w.adv * l.l_adv + w.rec * l.l_rec + w.texture * l.l_texture.value_or(0.0);
}

}  // namespace tamgan

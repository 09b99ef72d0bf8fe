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

// Generators, PatchGAN discriminators and the four-stage pyramid.
//
// Layers expose two forward paths: infer() is const and cache-free, so a
// network with frozen weights can serve concurrent read-only passes;
// forward_train() caches what backward() needs.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tamgan/ops.hpp"
#include "tamgan/spec.hpp"
#include "tamgan/tensor.hpp"

namespace tamgan {

// Named view of a trainable tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

// Non-trainable persistent state (spectral-norm power-iteration vectors).
template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value = nullptr;
};

template <typename T>
class ConvLayer {
 public:
  explicit ConvLayer(const LayerSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.spectral_norm && spec_.kind != LayerKind::conv) {
      throw ConfigError("spectral norm is only supported on convolutions");
    }
    const Shape ws = spec.kind == LayerKind::conv
                         ? Shape{spec.out_ch, spec.in_ch, spec.kernel, spec.kernel}
                         : Shape{spec.in_ch, spec.out_ch, spec.kernel, spec.kernel};
    weight_ = Tensor<T>(ws);
    grad_weight_ = Tensor<T>(ws);
    if (spec.bias) {
      bias_ = Tensor<T>(1, spec.out_ch, 1, 1);
      grad_bias_ = Tensor<T>(1, spec.out_ch, 1, 1);
    }
    if (spec.spectral_norm) {
      u_ = Tensor<T>(1, 1, 1, rows());
      v_ = Tensor<T>(1, 1, 1, cols());
    }
  }

  const LayerSpec& spec() const { return spec_; }
  Tensor<T>& weight() { return weight_; }
  const Tensor<T>& weight() const { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& bias() const { return bias_; }

  // Weight actually applied by the convolution (spectral-normalised when
  // enabled, using the current power-iteration vectors).
  Tensor<T> effective_weight() const {
    if (!spec_.spectral_norm) return weight_;
    Tensor<T> w = weight_;
    const T s = sigma(weight_);
    for (auto& x : w.values()) x /= s;
    return w;
  }

  // Current spectral-norm estimate u^T W v.
  T sigma_estimate() const { return sigma(weight_); }

  // N(0, std) weights, zero bias, then converge the power iteration.
  void init(std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : weight_.values()) x = static_cast<T>(dist(rng));
    bias_.fill(T{0});
    if (spec_.spectral_norm) {
      std::normal_distribution<double> unit(0.0, 1.0);
      for (auto& x : u_.values()) x = static_cast<T>(unit(rng));
      normalize(u_);
      for (auto& x : v_.values()) x = static_cast<T>(unit(rng));
      normalize(v_);
      converge_power_iteration();
    }
  }

  // Runs power iteration until the sigma estimate is stable.
  void converge_power_iteration(int max_iters = 2000, double tol = 1e-9) {
    if (!spec_.spectral_norm) return;
    double prev = 0;
    for (int i = 0; i < max_iters; ++i) {
      power_step();
      const double s = static_cast<double>(sigma(weight_));
      if (i > 0 && std::abs(s - prev) <= tol * std::abs(s)) break;
      prev = s;
    }
  }

  Tensor<T> infer(const Tensor<T>& x) const {
    Tensor<T> y = apply(x, spec_.spectral_norm ? effective_weight() : weight_);
    activate_inplace(y, spec_.activation);
    return y;
  }

  Tensor<T> forward_train(const Tensor<T>& x) {
    if (spec_.spectral_norm) {
      power_step();
      sigma_cache_ = sigma(weight_);
      w_cache_ = effective_weight();
    }
    Tensor<T> y = apply(x, spec_.spectral_norm ? w_cache_ : weight_);
    activate_inplace(y, spec_.activation);
    x_cache_ = x;
    y_cache_ = y;
    return y;
  }

  // Accumulates parameter gradients; returns dL/dx if requested.
  Tensor<T> backward(Tensor<T> dy, bool want_input_grad) {
    if (x_cache_.empty()) throw StateError("backward without forward_train");
    activation_backward_inplace(dy, y_cache_, spec_.activation);
    const Tensor<T>& w = spec_.spectral_norm ? w_cache_ : weight_;
    Tensor<T>* gb = spec_.bias ? &grad_bias_ : nullptr;
    Tensor<T> dx;
    if (!spec_.spectral_norm) {
      dx = spec_.kind == LayerKind::conv
               ? conv2d_backward(x_cache_, w, dy, spec_.geometry(), &grad_weight_,
                                 gb, want_input_grad)
               : conv_transpose2d_backward(x_cache_, w, dy, spec_.geometry(),
                                           &grad_weight_, gb, want_input_grad);
    } else {
      // Gradient w.r.t. the normalised weight, then through W / (u^T W v)
      // with u, v held constant.
      Tensor<T> gsn(weight_.shape());
      dx = conv2d_backward(x_cache_, w, dy, spec_.geometry(), &gsn, gb,
                           want_input_grad);
      T inner{0};
      for (std::size_t i = 0; i < gsn.size(); ++i) inner += gsn[i] * w[i];
      const int R = rows(), C = cols();
      for (int r = 0; r < R; ++r) {
        for (int c = 0; c < C; ++c) {
          const std::size_t i = static_cast<std::size_t>(r) * C + c;
          grad_weight_[i] += (gsn[i] - inner * u_[r] * v_[c]) / sigma_cache_;
        }
      }
    }
    return dx;
  }

  void zero_grad() {
    grad_weight_.fill(T{0});
    grad_bias_.fill(T{0});
  }

  void release_cache() {
    x_cache_ = {};
    y_cache_ = {};
  }

  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, &grad_weight_});
    if (spec_.bias) out.push_back({prefix + ".bias", &bias_, &grad_bias_});
  }

  void collect_buffers(std::vector<BufferRef<T>>& out, const std::string& prefix) {
    if (!spec_.spectral_norm) return;
    out.push_back({prefix + ".sn_u", &u_});
    out.push_back({prefix + ".sn_v", &v_});
  }

 private:
  // Weight viewed as a matrix: dim 0 against the rest.
  int rows() const { return weight_.n(); }
  int cols() const { return static_cast<int>(weight_.size() / weight_.n()); }

  Tensor<T> apply(const Tensor<T>& x, const Tensor<T>& w) const {
    if (x.c() != spec_.in_ch) {
      throw ShapeError("layer expects " + std::to_string(spec_.in_ch) +
                       " channels, got input " + x.shape().str());
    }
    return spec_.kind == LayerKind::conv
               ? conv2d(x, w, bias_, spec_.geometry())
               : conv_transpose2d(x, w, bias_, spec_.geometry());
  }

  T sigma(const Tensor<T>& w) const {
    const int R = rows(), C = cols();
    T s{0};
    for (int r = 0; r < R; ++r) {
      T acc{0};
      for (int c = 0; c < C; ++c) acc += w[static_cast<std::size_t>(r) * C + c] * v_[c];
      s += u_[r] * acc;
    }
    return s;
  }

  void power_step() {
    const int R = rows(), C = cols();
    for (int c = 0; c < C; ++c) {
      T acc{0};
      for (int r = 0; r < R; ++r) acc += weight_[static_cast<std::size_t>(r) * C + c] * u_[r];
      v_[c] = acc;
    }
    normalize(v_);
    for (int r = 0; r < R; ++r) {
      T acc{0};
      for (int c = 0; c < C; ++c) acc += weight_[static_cast<std::size_t>(r) * C + c] * v_[c];
      u_[r] = acc;
    }
    normalize(u_);
  }

  static void normalize(Tensor<T>& t) {
    T n{0};
    for (T x : t.values()) n += x * x;
    n = std::sqrt(n);
    const T denom = std::max(n, static_cast<T>(1e-12));
    for (auto& x : t.values()) x /= denom;
  }

  LayerSpec spec_;
  Tensor<T> weight_, bias_, grad_weight_, grad_bias_;
  Tensor<T> u_, v_;
  T sigma_cache_{1};
  Tensor<T> w_cache_, x_cache_, y_cache_;
};

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(const std::vector<LayerSpec>& specs) {
    layers_.reserve(specs.size());
    for (const auto& s : specs) layers_.emplace_back(s);
  }

  std::vector<ConvLayer<T>>& layers() { return layers_; }
  const std::vector<ConvLayer<T>>& layers() const { return layers_; }

  Tensor<T> infer(Tensor<T> x) const {
    for (const auto& l : layers_) x = l.infer(x);
    return x;
  }

  Tensor<T> forward_train(Tensor<T> x) {
    for (auto& l : layers_) x = l.forward_train(x);
    return x;
  }

  Tensor<T> backward(Tensor<T> dy, bool want_input_grad) {
    for (std::size_t i = layers_.size(); i-- > 0;) {
      dy = layers_[i].backward(std::move(dy), i > 0 || want_input_grad);
    }
    return dy;
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
  }
  void release_cache() {
    for (auto& l : layers_) l.release_cache();
  }
  void init(std::mt19937_64& rng, double stddev) {
    for (auto& l : layers_) l.init(rng, stddev);
  }
  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].collect(out, prefix + "." + std::to_string(i));
    }
  }
  void collect_buffers(std::vector<BufferRef<T>>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].collect_buffers(out, prefix + "." + std::to_string(i));
    }
  }

 private:
  std::vector<ConvLayer<T>> layers_;
};

// Inputs available to a generator of resolution n.
template <typename T>
struct GeneratorInputs {
  // Corrupted image and (unless blind) mask, concatenated, at n x n.
  const Tensor<T>* image = nullptr;
  const Tensor<T>* o32 = nullptr;
  const Tensor<T>* o64 = nullptr;
  const Tensor<T>* o128 = nullptr;
};

template <typename T>
class Generator {
 public:
  explicit Generator(GeneratorSpec spec) : spec_(std::move(spec)) {
    trace_generator(spec_);
    for (const auto& b : spec_.blocks) blocks_.emplace_back(b.layers);
  }

  const GeneratorSpec& spec() const { return spec_; }
  int resolution() const { return spec_.resolution; }

  Tensor<T> infer(const GeneratorInputs<T>& in) const {
    std::vector<Tensor<T>> outs;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const BlockSpec& bs = spec_.blocks[b];
      if (bs.source == InputSource::concat) {
        return blocks_[b].infer(concat(outs));
      }
      outs.push_back(blocks_[b].infer(block_input(bs, in)));
    }
    return std::move(outs.back());
  }

  Tensor<T> forward_train(const GeneratorInputs<T>& in) {
    std::vector<Tensor<T>> outs;
    branch_channels_.clear();
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const BlockSpec& bs = spec_.blocks[b];
      if (bs.source == InputSource::concat) {
        return blocks_[b].forward_train(concat(outs));
      }
      outs.push_back(blocks_[b].forward_train(block_input(bs, in)));
      branch_channels_.push_back(outs.back().c());
    }
    return std::move(outs.back());
  }

  // Parameter gradients only; generator inputs are data or frozen outputs.
  void backward(const Tensor<T>& dout) {
    if (spec_.blocks.back().source != InputSource::concat) {
      blocks_.back().backward(dout, false);
      return;
    }
    Tensor<T> dcat = blocks_.back().backward(dout, true);
    auto parts = split_channels(dcat, branch_channels_);
    for (std::size_t b = 0; b + 1 < blocks_.size(); ++b) {
      blocks_[b].backward(std::move(parts[b]), false);
    }
  }

  void zero_grad() {
    for (auto& b : blocks_) b.zero_grad();
  }
  void release_cache() {
    for (auto& b : blocks_) b.release_cache();
  }
  void init(std::mt19937_64& rng, double stddev) {
    for (auto& b : blocks_) b.init(rng, stddev);
  }
  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> out;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      blocks_[b].collect(out, "G" + std::to_string(spec_.resolution) + ".block" +
                                  std::to_string(b + 1));
    }
    return out;
  }
  std::vector<BufferRef<T>> buffers() { return {}; }

 private:
  static Tensor<T> concat(const std::vector<Tensor<T>>& outs) {
    std::vector<const Tensor<T>*> p;
    for (const auto& o : outs) p.push_back(&o);
    return concat_channels(p);
  }

  Tensor<T> block_input(const BlockSpec& bs, const GeneratorInputs<T>& in) const {
    const Tensor<T>* src = nullptr;
    switch (bs.source) {
      case InputSource::corrupted_mask: src = in.image; break;
      case InputSource::o32: src = in.o32; break;
      case InputSource::o64: src = in.o64; break;
      case InputSource::o128: src = in.o128; break;
      case InputSource::concat: break;
    }
    if (src == nullptr) {
      throw StateError("generator " + std::to_string(spec_.resolution) +
                       ": missing input " + to_string(bs.source));
    }
    if (bs.upsample_to > 0) return resize_bilinear(*src, bs.upsample_to, bs.upsample_to);
    return *src;
  }

  GeneratorSpec spec_;
  std::vector<Sequential<T>> blocks_;
  std::vector<int> branch_channels_;
};

template <typename T>
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorSpec spec)
      : spec_(std::move(spec)), net_(spec_.layers) {
    trace_discriminator(spec_);
  }

  const DiscriminatorSpec& spec() const { return spec_; }
  Sequential<T>& net() { return net_; }
  const Sequential<T>& net() const { return net_; }

  Tensor<T> infer(const Tensor<T>& x) const { return net_.infer(x); }
  Tensor<T> forward_train(const Tensor<T>& x) { return net_.forward_train(x); }
  Tensor<T> backward(const Tensor<T>& dscore, bool want_input_grad) {
    return net_.backward(dscore, want_input_grad);
  }
  void zero_grad() { net_.zero_grad(); }
  void release_cache() { net_.release_cache(); }
  void init(std::mt19937_64& rng, double stddev) { net_.init(rng, stddev); }
  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> out;
    net_.collect(out, "D" + std::to_string(spec_.resolution));
    return out;
  }
  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    net_.collect_buffers(out, "D" + std::to_string(spec_.resolution));
    return out;
  }

 private:
  DiscriminatorSpec spec_;
  Sequential<T> net_;
};

inline constexpr double kInitStddev = 0.02;

template <typename Net>
void init_weights(Net& net, std::mt19937_64& rng, double stddev = kInitStddev) {
  net.init(rng, stddev);
}

// The four generator/discriminator pairs.
template <typename T>
struct MultiGan {
  explicit MultiGan(bool blind_mode = false) : blind(blind_mode) {
    for (int n : kStageResolutions) {
      generators.emplace_back(generator_spec(n, blind));
      discriminators.emplace_back(discriminator_spec(n));
    }
  }

  Generator<T>& generator(int resolution) {
    return generators[stage_index(resolution)];
  }
  const Generator<T>& generator(int resolution) const {
    return generators[stage_index(resolution)];
  }
  Discriminator<T>& discriminator(int resolution) {
    return discriminators[stage_index(resolution)];
  }
  const Discriminator<T>& discriminator(int resolution) const {
    return discriminators[stage_index(resolution)];
  }

  // Deterministic N(0, 0.02) initialisation of every network.
  void init(std::uint64_t seed, double stddev = kInitStddev) {
    std::mt19937_64 rng(seed);
    for (auto& g : generators) init_weights(g, rng, stddev);
    for (auto& d : discriminators) init_weights(d, rng, stddev);
    trained.fill(false);
  }

  bool blind = false;
  std::vector<Generator<T>> generators;
  std::vector<Discriminator<T>> discriminators;
  // Stages whose training has completed; lower stages must be trained before
  // a higher one can run.
  std::array<bool, 4> trained{};
};

template <typename T>
struct PyramidOutput {
  std::array<std::optional<Tensor<T>>, 4> images;

  bool has(int resolution) const { return images[stage_index(resolution)].has_value(); }
  const Tensor<T>& at(int resolution) const {
    const auto& o = images[stage_index(resolution)];
    if (!o) throw StateError("pyramid output " + std::to_string(resolution) + " absent");
    return *o;
  }
};

// Generator input at resolution n: area-downsampled corrupted image times the
// nearest-downsampled mask, with the mask appended unless blind.
template <typename T>
Tensor<T> stage_image_input(const Tensor<T>& corrupted, const Tensor<T>& mask,
                            int n, bool blind) {
  const Tensor<T> m = resize_nearest(mask, n, n);
  const Tensor<T> img = apply_mask(resize_area(corrupted, n, n), m);
  if (blind) return img;
  return concat_channels<T>({&img, &m});
}

inline void validate_pyramid_input(const Shape& image, const Shape& mask) {
  if (image.c != 3 || image.h != 256 || image.w != 256) {
    throw InvalidInput("pyramid input must be (N,3,256,256), got " + image.str());
  }
  if (mask.c != 1 || mask.n != image.n || mask.h != 256 || mask.w != 256) {
    throw InvalidInput("pyramid mask must be (N,1,256,256), got " + mask.str());
  }
}

// Evaluates generators 32..stage in ascending order, each consuming the
// outputs below it. The generator at `stage` itself may be untrained (this is
// how training runs it); every lower stage must be trained.
template <typename T>
PyramidOutput<T> forward_pyramid(const MultiGan<T>& nets, const Tensor<T>& corrupted,
                                 const Tensor<T>& mask, int stage) {
  validate_pyramid_input(corrupted.shape(), mask.shape());
  const int top = stage_index(stage);
  for (int s = 0; s < top; ++s) {
    if (!nets.trained[s]) {
      throw StateError("stage " + std::to_string(kStageResolutions[s]) +
                       " must be trained before running stage " +
                       std::to_string(stage));
    }
  }
  PyramidOutput<T> out;
  for (int s = 0; s <= top; ++s) {
    const int n = kStageResolutions[s];
    const Tensor<T> image = stage_image_input(corrupted, mask, n, nets.blind);
    GeneratorInputs<T> in;
    in.image = &image;
    if (out.images[0]) in.o32 = &*out.images[0];
    if (out.images[1]) in.o64 = &*out.images[1];
    if (out.images[2]) in.o128 = &*out.images[2];
    out.images[s] = nets.generators[s].infer(in);
  }
  return out;
}

// Highest stage whose generator and all lower ones are trained; 0 if none.
template <typename T>
int top_trained_stage(const MultiGan<T>& nets) {
  int top = 0;
  for (int s = 0; s < 4 && nets.trained[s]; ++s) top = kStageResolutions[s];
  return top;
}

// Full inference on (N,3,256,256) / (N,1,256,256): corrupts the image with
// the mask, runs the pyramid up to the top trained stage, resizes that
// output to 256 when it is smaller, and optionally restores known pixels.
template <typename T>
Tensor<T> inpaint(const MultiGan<T>& nets, const Tensor<T>& image, const Tensor<T>& mask,
                  bool composite_known, PyramidOutput<T>* pyramid = nullptr) {
  validate_pyramid_input(image.shape(), mask.shape());
  const int top = top_trained_stage(nets);
  if (top == 0) throw StateError("no trained stage available for inference");
  PyramidOutput<T> out = forward_pyramid(nets, apply_mask(image, mask), mask, top);
  Tensor<T> result = out.at(top);
  if (top != 256) result = resize_bilinear(result, 256, 256);
  if (composite_known) result = composite(result, image, mask);
  if (pyramid) *pyramid = std::move(out);
  return result;
}

}  // namespace tamgan

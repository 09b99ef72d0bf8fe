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

// Declarative network descriptions. The same specs drive construction
// (nets.hpp), shape validation, analytic parameter / FLOP counting and the
// JSON network manifest.

#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tamgan/errors.hpp"
#include "tamgan/ops.hpp"

namespace tamgan {

inline constexpr std::array<int, 4> kStageResolutions{32, 64, 128, 256};

inline int stage_index(int resolution) {
  for (int i = 0; i < 4; ++i) {
    if (kStageResolutions[i] == resolution) return i;
  }
  throw ConfigError("unsupported resolution " + std::to_string(resolution) +
                    " (expected 32, 64, 128 or 256)");
}

enum class LayerKind { conv, transposed_conv };

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  Activation activation = Activation::relu;
  bool spectral_norm = false;
  bool bias = true;

  ConvGeometry geometry() const { return {kernel, stride, padding, 1}; }

  int out_size(int in) const {
    return kind == LayerKind::conv ? geometry().out_size(in)
                                   : geometry().transposed_out_size(in);
  }

  std::int64_t weight_count() const {
    return static_cast<std::int64_t>(kernel) * kernel * in_ch * out_ch;
  }
  std::int64_t param_count() const {
    return weight_count() + (bias ? out_ch : 0);
  }

  void validate() const {
    if (in_ch <= 0 || out_ch <= 0) throw ConfigError("layer: channels must be > 0");
    if (kernel != 3 && kernel != 4) throw ConfigError("layer: kernel must be 3 or 4");
    if (stride != 1 && stride != 2) throw ConfigError("layer: stride must be 1 or 2");
    if (padding != 1) throw ConfigError("layer: padding must be 1");
    if (spectral_norm && bias) {
      throw ConfigError("layer: spectral-normalised layers carry no bias");
    }
  }

  bool operator==(const LayerSpec&) const = default;
};

// Where a generator block reads its input from.
enum class InputSource { corrupted_mask, o32, o64, o128, concat };

struct BlockSpec {
  InputSource source = InputSource::corrupted_mask;
  // Bilinear resize of the source image to this side length before the block
  // (0 keeps the native resolution).
  int upsample_to = 0;
  std::vector<LayerSpec> layers;

  bool operator==(const BlockSpec&) const = default;
};

struct GeneratorSpec {
  int resolution = 32;
  // Blind generators receive the corrupted image without the mask channel.
  bool blind = false;
  std::vector<BlockSpec> blocks;

  int image_channels() const { return blind ? 3 : 4; }
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int resolution = 32;
  int base_width = 24;
  std::vector<LayerSpec> layers;

  bool operator==(const DiscriminatorSpec&) const = default;
};

inline int source_resolution(InputSource s) {
  switch (s) {
    case InputSource::o32: return 32;
    case InputSource::o64: return 64;
    case InputSource::o128: return 128;
    default: return 0;
  }
}

inline const char* to_string(InputSource s) {
  switch (s) {
    case InputSource::corrupted_mask: return "corrupted+mask";
    case InputSource::o32: return "O32";
    case InputSource::o64: return "O64";
    case InputSource::o128: return "O128";
    case InputSource::concat: return "concat";
  }
  return "?";
}

inline const char* to_string(LayerKind k) {
  return k == LayerKind::conv ? "conv" : "transposed_conv";
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

namespace detail {

inline LayerSpec conv(int in, int out, int k, int s,
                      Activation a = Activation::relu) {
  return {LayerKind::conv, in, out, k, s, 1, a, false, true};
}

inline LayerSpec tconv(int in, int out) {
  return {LayerKind::transposed_conv, in, out, 4, 2, 1, Activation::relu, false,
          true};
}

// Three-layer encoder branch: 3x3 s1, then two layers whose stride pattern
// decides how far the branch downsamples.
inline BlockSpec branch(InputSource src, int in_ch, int width, int s2, int s3,
                        int upsample_to = 0) {
  BlockSpec b;
  b.source = src;
  b.upsample_to = upsample_to;
  b.layers.push_back(conv(in_ch, width, 3, 1));
  b.layers.push_back(conv(width, 2 * width, s2 == 2 ? 4 : 3, s2));
  b.layers.push_back(conv(2 * width, 2 * width, s3 == 2 ? 4 : 3, s3));
  return b;
}

// Five 3x3 convs at 4*width, two x2 transposed convs, 3x3 tanh output.
inline std::vector<LayerSpec> decoder(int in_ch, int width) {
  std::vector<LayerSpec> l;
  for (int i = 0; i < 5; ++i) l.push_back(conv(i == 0 ? in_ch : 4 * width, 4 * width, 3, 1));
  l.push_back(tconv(4 * width, 2 * width));
  l.push_back(tconv(2 * width, width));
  l.push_back(conv(width, 3, 3, 1, Activation::tanh));
  return l;
}

}  // namespace detail

// The four shipped generator layouts.
inline GeneratorSpec generator_spec(int resolution, bool blind = false) {
  using detail::branch;
  using detail::decoder;
  const int img = blind ? 3 : 4;
  GeneratorSpec g;
  g.resolution = resolution;
  g.blind = blind;
  switch (resolution) {
    case 32: {
      BlockSpec b = branch(InputSource::corrupted_mask, img, 24, 2, 2);
      for (const auto& l : decoder(48, 24)) b.layers.push_back(l);
      g.blocks.push_back(b);
      break;
    }
    case 64:
      g.blocks.push_back(branch(InputSource::corrupted_mask, img, 24, 2, 2));
      g.blocks.push_back(branch(InputSource::o32, 3, 24, 2, 1));
      g.blocks.push_back({InputSource::concat, 0, decoder(96, 24)});
      break;
    case 128:
      g.blocks.push_back(branch(InputSource::corrupted_mask, img, 28, 2, 2));
      g.blocks.push_back(branch(InputSource::o64, 3, 28, 2, 1));
      g.blocks.push_back(branch(InputSource::o32, 3, 28, 1, 1));
      g.blocks.push_back({InputSource::concat, 0, decoder(168, 28)});
      break;
    case 256:
      g.blocks.push_back(branch(InputSource::corrupted_mask, img, 28, 2, 2));
      g.blocks.push_back(branch(InputSource::o128, 3, 28, 2, 1));
      g.blocks.push_back(branch(InputSource::o64, 3, 28, 1, 1));
      g.blocks.push_back(branch(InputSource::o32, 3, 28, 1, 1, 64));
      g.blocks.push_back({InputSource::concat, 0, decoder(224, 28)});
      break;
    default:
      stage_index(resolution);
  }
  return g;
}

// PatchGAN: three k4 s2 LeakyReLU convs (n, 2n, 4n) and a k4 s1 score layer,
// spectral norm everywhere, no biases.
inline DiscriminatorSpec discriminator_spec(int resolution) {
  stage_index(resolution);
  DiscriminatorSpec d;
  d.resolution = resolution;
  d.base_width = resolution <= 64 ? 24 : 28;
  const int n = d.base_width;
  const auto sn = [](int in, int out, int s, Activation a) {
    return LayerSpec{LayerKind::conv, in, out, 4, s, 1, a, true, false};
  };
  d.layers = {sn(3, n, 2, Activation::leaky_relu),
              sn(n, 2 * n, 2, Activation::leaky_relu),
              sn(2 * n, 4 * n, 2, Activation::leaky_relu),
              sn(4 * n, 1, 1, Activation::none)};
  return d;
}

// Shape of one layer application, produced by tracing a spec.
struct LayerTrace {
  int block = 0;
  int layer = 0;
  LayerSpec spec;
  int in_size = 0;
  int out_size = 0;
};

struct BlockTrace {
  int in_channels = 0;
  int in_size = 0;
  int out_channels = 0;
  int out_size = 0;
};

struct GeneratorTrace {
  std::vector<BlockTrace> blocks;
  std::vector<LayerTrace> layers;
};

// Walks a GeneratorSpec with concrete sizes and checks every channel and spatial
// hand-off. Throws ShapeError on any inconsistency.
inline GeneratorTrace trace_generator(const GeneratorSpec& g) {
  stage_index(g.resolution);
  static constexpr std::array<std::size_t, 4> kBlocks{1, 3, 4, 5};
  if (g.blocks.size() != kBlocks[stage_index(g.resolution)]) {
    throw ShapeError("generator " + std::to_string(g.resolution) + ": expected " +
                     std::to_string(kBlocks[stage_index(g.resolution)]) + " blocks");
  }
  GeneratorTrace t;
  for (std::size_t b = 0; b < g.blocks.size(); ++b) {
    const BlockSpec& blk = g.blocks[b];
    BlockTrace bt;
    switch (blk.source) {
      case InputSource::corrupted_mask:
        bt.in_channels = g.image_channels();
        bt.in_size = g.resolution;
        break;
      case InputSource::concat: {
        if (b == 0) throw ShapeError("concat block cannot come first");
        bt.in_size = t.blocks.front().out_size;
        for (const auto& prev : t.blocks) {
          if (prev.out_size != bt.in_size) {
            throw ShapeError("generator " + std::to_string(g.resolution) +
                             ": concatenated branches disagree in size (" +
                             std::to_string(prev.out_size) + " vs " +
                             std::to_string(bt.in_size) + ")");
          }
          bt.in_channels += prev.out_channels;
        }
        break;
      }
      default: {
        const int r = source_resolution(blk.source);
        if (r >= g.resolution) {
          throw ShapeError("generator " + std::to_string(g.resolution) +
                           " cannot consume " + to_string(blk.source));
        }
        bt.in_channels = 3;
        bt.in_size = blk.upsample_to > 0 ? blk.upsample_to : r;
      }
    }
    if (blk.layers.empty()) throw ShapeError("empty generator block");
    int ch = bt.in_channels;
    int size = bt.in_size;
    for (std::size_t l = 0; l < blk.layers.size(); ++l) {
      const LayerSpec& ls = blk.layers[l];
      ls.validate();
      if (ls.in_ch != ch) {
        throw ShapeError("generator " + std::to_string(g.resolution) + " block " +
                         std::to_string(b + 1) + " layer " + std::to_string(l + 1) +
                         ": expects " + std::to_string(ls.in_ch) +
                         " input channels, receives " + std::to_string(ch));
      }
      const int out = ls.out_size(size);
      t.layers.push_back({static_cast<int>(b), static_cast<int>(l), ls, size, out});
      ch = ls.out_ch;
      size = out;
    }
    bt.out_channels = ch;
    bt.out_size = size;
    t.blocks.push_back(bt);
  }
  const BlockTrace& last = t.blocks.back();
  if (last.out_channels != 3 || last.out_size != g.resolution) {
    throw ShapeError("generator " + std::to_string(g.resolution) +
                     ": output is " + std::to_string(last.out_channels) + "x" +
                     std::to_string(last.out_size));
  }
  if (g.blocks.back().layers.back().activation != Activation::tanh) {
    throw ShapeError("generator output layer must use tanh");
  }
  return t;
}

inline std::vector<LayerTrace> trace_discriminator(const DiscriminatorSpec& d) {
  std::vector<LayerTrace> out;
  int ch = 3;
  int size = d.resolution;
  for (std::size_t l = 0; l < d.layers.size(); ++l) {
    const LayerSpec& ls = d.layers[l];
    ls.validate();
    if (ls.in_ch != ch) throw ShapeError("discriminator channel mismatch");
    const int o = ls.out_size(size);
    if (o <= 0) throw ShapeError("discriminator input too small");
    out.push_back({0, static_cast<int>(l), ls, size, o});
    ch = ls.out_ch;
    size = o;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Efficiency accounting.

struct LayerCost {
  std::string network;
  int block = 0;
  int layer = 0;
  LayerKind kind = LayerKind::conv;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int out_size = 0;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

// Multiply-accumulates are counted as k^2 * Cin * Cout * Hout * Wout for both
// convolutions and transposed convolutions (output-extent convention of the
// common PyTorch profilers); total_flops counts each MAC as two operations.
struct EfficiencyReport {
  std::int64_t total_params = 0;
  std::int64_t total_macs = 0;
  std::int64_t total_flops = 0;
  std::int64_t discriminator_params = 0;
  std::vector<LayerCost> layers;

  double params_millions() const { return total_params / 1e6; }
  double giga_macs() const { return total_macs / 1e9; }
  double gflops() const { return total_flops / 1e9; }
};

inline EfficiencyReport count_efficiency(
    const std::vector<GeneratorSpec>& generators,
    const std::vector<DiscriminatorSpec>& discriminators = {},
    int input_size = 256) {
  EfficiencyReport r;
  for (const auto& g : generators) {
    if (g.resolution > input_size) {
      throw ConfigError("generator resolution exceeds input size");
    }
    const GeneratorTrace t = trace_generator(g);
    for (const auto& lt : t.layers) {
      LayerCost c;
      c.network = "G" + std::to_string(g.resolution);
      c.block = lt.block + 1;
      c.layer = lt.layer + 1;
      c.kind = lt.spec.kind;
      c.in_ch = lt.spec.in_ch;
      c.out_ch = lt.spec.out_ch;
      c.kernel = lt.spec.kernel;
      c.out_size = lt.out_size;
      c.params = lt.spec.param_count();
      c.macs = lt.spec.weight_count() * lt.out_size * lt.out_size;
      r.total_params += c.params;
      r.total_macs += c.macs;
      r.layers.push_back(c);
    }
  }
  r.total_flops = 2 * r.total_macs;
  for (const auto& d : discriminators) {
    for (const auto& l : d.layers) r.discriminator_params += l.param_count();
  }
  return r;
}

inline std::vector<GeneratorSpec> shipped_generators(bool blind = false) {
  std::vector<GeneratorSpec> g;
  for (int n : kStageResolutions) g.push_back(generator_spec(n, blind));
  return g;
}

inline std::vector<DiscriminatorSpec> shipped_discriminators() {
  std::vector<DiscriminatorSpec> d;
  for (int n : kStageResolutions) d.push_back(discriminator_spec(n));
  return d;
}

// ---------------------------------------------------------------------------
// JSON network manifest.

inline constexpr int kManifestVersion = 1;

NLOHMANN_JSON_SERIALIZE_ENUM(LayerKind, {{LayerKind::conv, "conv"},
                                         {LayerKind::transposed_conv, "transposed_conv"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Activation, {{Activation::none, "none"},
                                          {Activation::relu, "relu"},
                                          {Activation::leaky_relu, "leaky_relu"},
                                          {Activation::tanh, "tanh"}})
NLOHMANN_JSON_SERIALIZE_ENUM(InputSource, {{InputSource::corrupted_mask, "corrupted+mask"},
                                           {InputSource::o32, "O32"},
                                           {InputSource::o64, "O64"},
                                           {InputSource::o128, "O128"},
                                           {InputSource::concat, "concat"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LayerSpec, kind, in_ch, out_ch, kernel, stride,
                                   padding, activation, spectral_norm, bias)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BlockSpec, source, upsample_to, layers)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GeneratorSpec, resolution, blind, blocks)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DiscriminatorSpec, resolution, base_width, layers)

struct NetworkManifest {
  std::vector<GeneratorSpec> generators;
  std::vector<DiscriminatorSpec> discriminators;
};

inline nlohmann::json manifest_to_json(const NetworkManifest& m) {
  return {{"format", "tamgan.network"},
          {"version", kManifestVersion},
          {"generators", m.generators},
          {"discriminators", m.discriminators}};
}

inline NetworkManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "tamgan.network") {
      throw ConfigError("not a tamgan network manifest");
    }
    if (j.at("version").get<int>() != kManifestVersion) {
      throw ConfigError("unsupported manifest version " + j.at("version").dump());
    }
    NetworkManifest m;
    j.at("generators").get_to(m.generators);
    j.at("discriminators").get_to(m.discriminators);
    for (const auto& g : m.generators) trace_generator(g);
    for (const auto& d : m.discriminators) trace_discriminator(d);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network manifest: ") + e.what());
  }
}

inline NetworkManifest shipped_manifest(bool blind = false) {
  return {shipped_generators(blind), shipped_discriminators()};
}

}  // namespace tamgan

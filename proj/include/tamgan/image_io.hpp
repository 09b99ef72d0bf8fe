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

// 8-bit PNG encode/decode and conversions between byte rasters and network
// tensors. PNG is the only supported image format.

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "tamgan/errors.hpp"
#include "tamgan/masks.hpp"
#include "tamgan/tensor.hpp"

namespace tamgan {

// Interleaved 8-bit raster, 1 (gray) or 3 (RGB) channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image8&) const = default;
};

namespace detail {

inline png_uint_32 png_format(int channels) {
  if (channels == 1) return PNG_FORMAT_GRAY;
  if (channels == 3) return PNG_FORMAT_RGB;
  throw InvalidInput("PNG channel count must be 1 or 3, got " + std::to_string(channels));
}

}  // namespace detail

// Decodes to `channels` (1 or 3), converting colour type as libpng sees fit.
// Alpha is composited onto black.
inline Image8 decode_png(std::string_view bytes, int channels = 3) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    const std::string why = img.message;
    png_image_free(&img);
    throw InvalidInput("not a decodable PNG: " + why);
  }
  img.format = detail::png_format(channels);
  Image8 out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&img, &black, out.pixels.data(), 0, nullptr)) {
    const std::string why = img.message;
    png_image_free(&img);
    throw InvalidInput("PNG decode failed: " + why);
  }
  return out;
}

inline std::string encode_png(const Image8& im) {
  if (im.width <= 0 || im.height <= 0) throw InvalidInput("cannot encode an empty image");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(im.width);
  img.height = static_cast<png_uint_32>(im.height);
  img.format = detail::png_format(im.channels);
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(img, size, 0, im.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + img.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, im.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + p.string());
}

inline Image8 read_png(const std::filesystem::path& p, int channels = 3) {
  try {
    return decode_png(read_file(p), channels);
  } catch (const InvalidInput& e) {
    throw InvalidInput(p.string() + ": " + e.what());
  }
}

inline void write_png(const std::filesystem::path& p, const Image8& im) {
  write_file(p, encode_png(im));
}

// (1,3,H,W) in [-1, 1].
inline Tensor<float> image_to_tensor(const Image8& im) {
  if (im.channels != 3) throw InvalidInput("expected an RGB image");
  Tensor<float> t(1, 3, im.height, im.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < im.height; ++y)
      for (int x = 0; x < im.width; ++x) t.at(0, c, y, x) = im.at(y, x, c) / 127.5f - 1.0f;
  return t;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Sample `n` of a [-1, 1] tensor to RGB (3 channels) or gray (1 channel).
inline Image8 tensor_to_image(const Tensor<float>& t, int n = 0) {
  if (t.c() != 3 && t.c() != 1) throw InvalidInput("tensor must have 1 or 3 channels");
  Image8 im(t.w(), t.h(), t.c());
  for (int c = 0; c < t.c(); ++c)
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x)
        im.at(y, x, c) = to_byte((t.at(n, c, y, x) + 1.0) * 127.5);
  return im;
}

// Masks travel as 8-bit gray: 255 = known, 0 = hole. Anything else is
// rejected so masks survive transport exactly.
inline Mask mask_from_image(const Image8& im) {
  if (im.channels != 1) throw InvalidInput("mask must be single-channel");
  Tensor<float> t(1, 1, im.height, im.width);
  for (std::size_t i = 0; i < im.pixels.size(); ++i) {
    const std::uint8_t v = im.pixels[i];
    if (v != 0 && v != 255) {
      throw InvalidInput("mask PNG is not binary (found value " + std::to_string(v) + ")");
    }
    t[i] = v == 255 ? 1.0f : 0.0f;
  }
  return Mask(std::move(t));
}

inline Image8 mask_to_image(const Mask& m) {
  Image8 im(m.width(), m.height(), 1);
  const auto& t = m.tensor();
  for (std::size_t i = 0; i < t.size(); ++i) im.pixels[i] = t[i] == 1.0f ? 255 : 0;
  return im;
}

}  // namespace tamgan

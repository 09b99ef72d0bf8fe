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

// Versioned binary archive: magic, format version, a JSON manifest, then the
// raw little-endian float32 payload of every tensor in manifest order.
//
//   "TAMGANCK" | u32 version | u64 manifest bytes | manifest | payload

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tamgan/errors.hpp"
#include "tamgan/image_io.hpp"
#include "tamgan/tensor.hpp"

namespace tamgan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline constexpr char kCheckpointMagic[8] = {'T', 'A', 'M', 'G', 'A', 'N', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Checkpoint {
  // Free-form metadata (config, cursors, RNG state); the tensor index is
  // generated on serialisation and must not be set here.
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }

  const Tensor<float>& get(const std::string& name) const {
    const Tensor<float>* t = find(name);
    if (!t) throw IoError("checkpoint is missing tensor '" + name + "'");
    return *t;
  }

  std::string serialize() const {
    nlohmann::json manifest = meta;
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
      index.push_back({{"name", name},
                       {"shape", {t.n(), t.c(), t.h(), t.w()}},
                       {"offset", offset}});
      offset += t.size() * sizeof(float);
    }
    manifest["tensors"] = std::move(index);
    const std::string text = manifest.dump();

    std::string out;
    out.reserve(8 + 4 + 8 + text.size() + offset);
    out.append(kCheckpointMagic, 8);
    append_pod(out, kCheckpointVersion);
    append_pod(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    for (const auto& [name, t] : tensors) {
      out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
    }
    return out;
  }

  static Checkpoint parse(std::string_view bytes) {
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
      throw IoError("not a tamgan checkpoint");
    }
    const auto version = read_pod<std::uint32_t>(bytes, 8);
    if (version != kCheckpointVersion) {
      throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto len = read_pod<std::uint64_t>(bytes, 12);
    if (20 + len > bytes.size()) throw IoError("truncated checkpoint manifest");
    Checkpoint ck;
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(bytes.substr(20, len));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("corrupt checkpoint manifest: ") + e.what());
    }
    const std::size_t base = 20 + len;
    std::size_t expected = 0;
    for (const auto& e : manifest.at("tensors")) {
      const auto s = e.at("shape").get<std::vector<int>>();
      if (s.size() != 4) throw IoError("bad tensor shape in checkpoint");
      Tensor<float> t(s[0], s[1], s[2], s[3]);
      const auto off = e.at("offset").get<std::uint64_t>();
      const std::size_t nbytes = t.size() * sizeof(float);
      if (off != expected || base + off + nbytes > bytes.size()) {
        throw IoError("truncated or misaligned checkpoint payload");
      }
      std::memcpy(t.data(), bytes.data() + base + off, nbytes);
      expected += nbytes;
      ck.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    if (base + expected != bytes.size()) throw IoError("trailing bytes in checkpoint");
    manifest.erase("tensors");
    ck.meta = std::move(manifest);
    return ck;
  }

  // Atomic: writes a sibling temporary file, then renames over `path`.
  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    write_file(tmp, serialize());
    std::filesystem::rename(tmp, path);
  }

  static Checkpoint load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
    return parse(read_file(path));
  }

 private:
  template <typename P>
  static void append_pod(std::string& out, P v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(P));
  }
  template <typename P>
  static P read_pod(std::string_view b, std::size_t off) {
    P v;
    std::memcpy(&v, b.data() + off, sizeof(P));
    return v;
  }
};

}  // namespace tamgan

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

// Inference service: PNG in, PNG out, over HTTP.
//
//   GET  /healthz  -> 200 "ok"
//   GET  /model    -> JSON efficiency figures of the loaded stack
//   POST /inpaint  -> multipart fields: image (PNG), mask (PNG, 255 known /
//                     0 hole; optional for blind checkpoints), composite,
//                     return_pyramid ("true"/"false"). Replies with JSON
//                     carrying base64 PNGs, or the raw result PNG when the
//                     query string has format=png.
//
// Errors are JSON bodies {"error": <code>, "message": <text>}.

#pragma once

// Eigen-backed headers first: httplib pulls in <resolv.h>, whose `_res` macro
// collides with Eigen parameter names.
#include "tamgan/image_io.hpp"
#include "tamgan/masks.hpp"
#include "tamgan/nets.hpp"
#include "tamgan/spec.hpp"
#include "tamgan/trainer.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

namespace tamgan {

inline constexpr const char* kCheckpointEnv = "TAMGAN_CHECKPOINT";

struct InpaintRequest {
  std::string image_png;
  std::optional<std::string> mask_png;
  bool composite = true;
  bool return_pyramid = false;
};

struct InpaintResponse {
  std::string result_png;
  // Stage outputs at native resolution, keyed by stage.
  std::map<int, std::string> pyramid_png;
  int width = 0;
  int height = 0;
  // Absent when no mask was supplied.
  std::optional<double> hole_ratio;
  std::optional<MaskBin> bin;
  double latency_ms = 0;
};

namespace detail {

// Resamples a binary mask; a target pixel is a hole if any source pixel it
// covers is a hole.
inline Tensor<float> resize_mask_conservative(const Tensor<float>& m, int H, int W) {
  Tensor<float> out(1, 1, H, W, 1.0f);
  const double sy = static_cast<double>(m.h()) / H, sx = static_cast<double>(m.w()) / W;
  for (int y = 0; y < H; ++y) {
    const int y0 = static_cast<int>(std::floor(y * sy));
    const int y1 = std::max(y0 + 1, static_cast<int>(std::ceil((y + 1) * sy)));
    for (int x = 0; x < W; ++x) {
      const int x0 = static_cast<int>(std::floor(x * sx));
      const int x1 = std::max(x0 + 1, static_cast<int>(std::ceil((x + 1) * sx)));
      bool hole = false;
      for (int yy = y0; yy < std::min(y1, m.h()) && !hole; ++yy)
        for (int xx = x0; xx < std::min(x1, m.w()) && !hole; ++xx)
          hole = m.at(0, 0, yy, xx) == 0.0f;
      if (hole) out.at(0, 0, y, x) = 0.0f;
    }
  }
  return out;
}

inline Tensor<float> resize_image(const Tensor<float>& t, int H, int W) {
  if (t.h() == H && t.w() == W) return t;
  if (t.h() >= H && t.w() >= W) return resize_area(t, H, W);
  return resize_bilinear(t, H, W);
}

}  // namespace detail

class InpaintService {
 public:
  explicit InpaintService(MultiGan<float> nets) : nets_(std::move(nets)) {
    if (top_trained_stage(nets_) == 0) throw StateError("checkpoint has no trained stage");
    efficiency_ = count_efficiency(shipped_generators(nets_.blind), shipped_discriminators());
  }

  static InpaintService from_checkpoint(const std::filesystem::path& path) {
    return InpaintService(load_networks(path));
  }

  const MultiGan<float>& nets() const { return nets_; }

  nlohmann::json model_info() const {
    nlohmann::json trained = nlohmann::json::array();
    for (int s : kStageResolutions)
      if (nets_.trained[stage_index(s)]) trained.push_back(s);
    return {{"params", efficiency_.total_params},
            {"params_millions", efficiency_.params_millions()},
            {"giga_macs", efficiency_.giga_macs()},
            {"gflops", efficiency_.gflops()},
            {"discriminator_params", efficiency_.discriminator_params},
            {"blind", nets_.blind},
            {"trained_stages", trained},
            {"output_stage", top_trained_stage(nets_)}};
  }

  // Thread-safe: only reads the networks.
  InpaintResponse inpaint(const InpaintRequest& req) const {
    const auto t0 = std::chrono::steady_clock::now();
    const Image8 image = decode_png(req.image_png, 3);
    std::optional<Mask> mask;
    if (req.mask_png) {
      Image8 mimg;
      try {
        mimg = decode_png(*req.mask_png, 1);
      } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("mask: ") + e.what());
      }
      if (mimg.width != image.width || mimg.height != image.height) {
        throw InvalidInput(fmt::format("size mismatch: image is {}x{}, mask is {}x{}", image.width,
                                       image.height, mimg.width, mimg.height));
      }
      mask = mask_from_image(mimg);
    } else if (!nets_.blind) {
      throw InvalidInput("mask is required unless the model is blind");
    }

    const int H = image.height, W = image.width;
    const Tensor<float> full = image_to_tensor(image);
    const Tensor<float> full_mask = mask ? mask->tensor() : Tensor<float>(1, 1, H, W, 1.0f);
    const Tensor<float> img256 = detail::resize_image(full, kImageSize, kImageSize);
    const Tensor<float> mask256 =
        (H == kImageSize && W == kImageSize)
            ? full_mask
            : detail::resize_mask_conservative(full_mask, kImageSize, kImageSize);

    PyramidOutput<float> pyr;
    const Tensor<float> out256 = tamgan::inpaint(nets_, img256, mask256, false, &pyr);
    const Tensor<float> out = detail::resize_image(out256, H, W);

    Image8 result = tensor_to_image(out);
    if (req.composite && mask) {
      // Known pixels come from the original bytes, not the resampled tensor.
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          if (mask->known(y, x))
            for (int c = 0; c < 3; ++c) result.at(y, x, c) = image.at(y, x, c);
    }

    InpaintResponse r;
    r.width = W;
    r.height = H;
    r.result_png = encode_png(result);
    if (req.return_pyramid) {
      for (int s : kStageResolutions)
        if (pyr.has(s)) r.pyramid_png[s] = encode_png(tensor_to_image(pyr.at(s)));
    }
    if (mask) {
      r.hole_ratio = mask->hole_ratio();
      r.bin = classify(*mask);
    }
    r.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

 private:
  MultiGan<float> nets_;
  EfficiencyReport efficiency_;
};

inline nlohmann::json error_body(const std::string& code, const std::string& message) {
  return {{"error", code}, {"message", message}};
}

inline nlohmann::json to_json(const InpaintResponse& r) {
  nlohmann::json j = {{"width", r.width},
                      {"height", r.height},
                      {"latency_ms", r.latency_ms},
                      {"result", httplib::detail::base64_encode(r.result_png)}};
  j["hole_ratio"] = r.hole_ratio ? nlohmann::json(*r.hole_ratio) : nlohmann::json();
  j["bin"] = r.bin ? nlohmann::json(to_string(*r.bin)) : nlohmann::json();
  if (!r.pyramid_png.empty()) {
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [s, png] : r.pyramid_png) p[std::to_string(s)] = httplib::detail::base64_encode(png);
    j["pyramid"] = std::move(p);
  }
  return j;
}

namespace detail {

inline bool parse_flag(const std::string& name, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidInput("field '" + name + "' must be true or false, got '" + v + "'");
}

inline void reply_error(httplib::Response& res, int status, const std::string& code,
                        const std::string& message) {
  res.status = status;
  res.set_content(error_body(code, message).dump(), "application/json");
}

}  // namespace detail

// Registers the routes on `server`. `service` must outlive it.
inline void install_routes(httplib::Server& server, const InpaintService& service) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  server.Get("/model", [&service](const httplib::Request&, httplib::Response& res) {
    res.set_content(service.model_info().dump(), "application/json");
  });
  server.Post("/inpaint", [&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      detail::reply_error(res, 400, "not_multipart", "expected multipart/form-data");
      return;
    }
    if (!req.has_file("image")) {
      detail::reply_error(res, 400, "missing_field", "multipart field 'image' is required");
      return;
    }
    try {
      InpaintRequest in;
      in.image_png = req.get_file_value("image").content;
      if (req.has_file("mask")) in.mask_png = req.get_file_value("mask").content;
      if (req.has_file("composite")) {
        in.composite = detail::parse_flag("composite", req.get_file_value("composite").content);
      }
      if (req.has_file("return_pyramid")) {
        in.return_pyramid =
            detail::parse_flag("return_pyramid", req.get_file_value("return_pyramid").content);
      }
      const InpaintResponse out = service.inpaint(in);
      if (req.get_param_value("format") == "png") {
        res.set_content(out.result_png, "image/png");
      } else {
        res.set_content(to_json(out).dump(), "application/json");
      }
    } catch (const InvalidInput& e) {
      detail::reply_error(res, 400, "invalid_input", e.what());
    } catch (const std::exception& e) {
      spdlog::error("/inpaint failed: {}", e.what());
      detail::reply_error(res, 500, "internal", e.what());
    }
  });
}

// Checkpoint path from `explicit_path`, else from $TAMGAN_CHECKPOINT.
inline std::filesystem::path resolve_checkpoint(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* env = std::getenv(kCheckpointEnv); env && *env) return env;
  throw ConfigError(std::string("no checkpoint given and ") + kCheckpointEnv + " is unset");
}

}  // namespace tamgan

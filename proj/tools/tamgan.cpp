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

// tamgan command-line entry point.
//
// Exit status: 0 success, 1 runtime failure, 2 invalid input or
// configuration, CLI11's own codes for argument errors.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "tamgan/checkpoint.hpp"
#include "tamgan/dataset.hpp"
#include "tamgan/image_io.hpp"
#include "tamgan/lbp.hpp"
#include "tamgan/masks.hpp"
#include "tamgan/metrics.hpp"
#include "tamgan/service.hpp"
#include "tamgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace tamgan;

namespace {

std::vector<MaskBin> parse_bins(const std::string& spec) {
  if (spec == "all") return {kMaskBins.begin(), kMaskBins.end()};
  std::vector<MaskBin> out;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_mask_bin(item));
  if (out.empty()) throw InvalidInput("no mask bins given");
  return out;
}

struct DataArgs {
  std::string dir;
  std::string split = "test";
  std::size_t synthetic = 0;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--data", dir, "Image folder (uses <dir>/<split> when present)");
    app->add_option("--split", split, "Split subdirectory")->capture_default_str();
    app->add_option("--synthetic", synthetic, "Use N procedural textures instead of a folder");
    app->add_option("--data-seed", seed, "Seed for --synthetic")->capture_default_str();
  }

  Dataset open() const {
    if (synthetic > 0) return Dataset::synthetic(synthetic, seed);
    if (dir.empty()) throw ConfigError("give --data DIR or --synthetic N");
    return Dataset::folder(dir, split);
  }
};

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, resume, init_from, data, out, log;
  std::int64_t max_steps = -1;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : TrainConfig::load(a.config);
  if (!a.data.empty()) {
    cfg.data.kind = "folder";
    cfg.data.root = a.data;
  }
  if (!a.out.empty()) cfg.checkpoint = a.out;
  if (!a.log.empty()) cfg.log_csv = a.log;
  cfg.validate();
  Dataset data = open_dataset(cfg.data);
  spdlog::info("training on {}", data.describe());

  std::optional<Trainer> t;
  if (!a.resume.empty()) {
    t.emplace(cfg, std::move(data), Checkpoint::load(a.resume));
    spdlog::info("resumed at stage {} step {}", t->current_stage(), t->stage_step());
  } else if (!a.init_from.empty()) {
    t.emplace(Trainer::from_pretrained(cfg, std::move(data), Checkpoint::load(a.init_from)));
  } else {
    t.emplace(cfg, std::move(data));
  }
  t->on_step([](const StepRecord& r) {
    if (r.stage_step % 10 == 0 || r.stage_step == 1) {
      spdlog::info("step {} stage {} l_rec {:.4f} l_adv {:.4f} l_dis {:.4f}{}", r.global_step,
                   r.stage, r.losses.l_rec, r.losses.l_adv, r.losses.l_dis,
                   r.losses.l_texture ? fmt::format(" l_texture {:.4f}", *r.losses.l_texture)
                                      : std::string());
    }
  });
  const auto steps = t->run(a.max_steps);
  spdlog::info("{} steps done; {}", steps, t->finished() ? "schedule complete" : "paused");
  if (cfg.checkpoint.empty()) spdlog::warn("no checkpoint path configured; weights discarded");
  return 0;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string ckpt, image, mask, out, pyramid;
  bool no_composite = false;
};

int run_infer(const InferArgs& a) {
  const InpaintService svc = InpaintService::from_checkpoint(resolve_checkpoint(a.ckpt));
  InpaintRequest req;
  req.image_png = read_file(a.image);
  if (!a.mask.empty()) req.mask_png = read_file(a.mask);
  req.composite = !a.no_composite;
  req.return_pyramid = !a.pyramid.empty();
  const InpaintResponse r = svc.inpaint(req);
  write_file(a.out, r.result_png);
  if (!a.pyramid.empty()) {
    fs::create_directories(a.pyramid);
    for (const auto& [s, png] : r.pyramid_png) {
      write_file(fs::path(a.pyramid) / fmt::format("O{}.png", s), png);
    }
  }
  spdlog::info("wrote {} ({}x{}, {:.1f} ms{})", a.out, r.width, r.height, r.latency_ms,
               r.bin ? fmt::format(", hole ratio {:.3f} bin {}", *r.hole_ratio, to_string(*r.bin))
                     : std::string());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, bins = "all", out;
  DataArgs data;
  std::uint64_t seed = 0;
  std::size_t limit = 0;
  bool raw = false;
};

int run_eval(const EvalArgs& a) {
  const MultiGan<float> nets = load_networks(resolve_checkpoint(a.ckpt));
  EvalConfig cfg;
  cfg.bins = parse_bins(a.bins);
  cfg.seed = a.seed;
  cfg.limit = a.limit;
  cfg.composite = !a.raw;
  const Dataset data = a.data.open();
  spdlog::info("evaluating stage {} output on {}", top_trained_stage(nets), data.describe());
  const MetricsReport r = evaluate(nets, data, cfg);
  const bool csv = fs::path(a.out).extension() == ".csv";
  const std::string text = csv ? to_csv(r) : to_json(r).dump(2) + "\n";
  if (a.out.empty() || a.out == "-") {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
  return 0;
}

// ---------------------------------------------------------------------------

int run_bench(const std::string& ckpt, int iters, int warmup, bool json) {
  const MultiGan<float> nets = load_networks(resolve_checkpoint(ckpt));
  const auto eff = count_efficiency(shipped_generators(nets.blind));
  const BenchReport b = bench(nets, iters, warmup);
  if (json) {
    std::cout << nlohmann::json{{"params", eff.total_params},
                                {"giga_macs", eff.giga_macs()},
                                {"gflops", eff.gflops()},
                                {"iters", b.iters},
                                {"mean_ms", b.mean_ms},
                                {"p95_ms", b.p95_ms},
                                {"min_ms", b.min_ms},
                                {"max_ms", b.max_ms}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << fmt::format("{:<10} {:>10} {:>10} {:>10} {:>12} {:>10}\n", "model", "params",
                             "GMACs", "GFLOPs", "mean (ms)", "p95 (ms)");
    std::cout << fmt::format("{:<10} {:>9.2f}M {:>10.2f} {:>10.2f} {:>12.1f} {:>10.1f}\n", "tamgan",
                             eff.params_millions(), eff.giga_macs(), eff.gflops(), b.mean_ms,
                             b.p95_ms);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct MaskgenArgs {
  std::string bin = "all", kind = "freeform", out;
  int n = 10;
  int size = 256;
  std::uint64_t seed = 0;
};

int run_maskgen(const MaskgenArgs& a) {
  fs::create_directories(a.out);
  const auto bins = parse_bins(a.bin);
  for (int i = 0; i < a.n; ++i) {
    const MaskBin bin = bins[static_cast<std::size_t>(i) % bins.size()];
    const std::uint64_t seed = mix_seed({a.seed, static_cast<std::uint64_t>(i)});
    Mask m = a.kind == "block"      ? gen_block(a.size, a.size, seed)
             : a.kind == "outpaint" ? gen_outpaint(a.size, a.size)
                                    : gen_freeform(a.size, a.size, bin, seed);
    write_png(fs::path(a.out) / fmt::format("mask_{:05d}.png", i), mask_to_image(m));
  }
  spdlog::info("wrote {} {} masks to {}", a.n, a.kind, a.out);
  return 0;
}

int run_lbp(const std::string& image, const std::string& out, int dilation, bool surrogate) {
  LbpConfig cfg;
  cfg.dilation = dilation;
  const Tensor<double> gray =
      to_gray(to_byte_range(image_to_tensor(read_png(image)).cast<double>()));
  Tensor<double> codes = surrogate ? lbp_surrogate(gray, cfg) : lbp_exact(gray, cfg);
  if (surrogate)
    for (auto& v : codes.values()) v *= 255.0;
  Image8 im(codes.w(), codes.h(), 1);
  for (std::size_t i = 0; i < codes.size(); ++i) im.pixels[i] = to_byte(codes[i]);
  write_png(out, im);
  return 0;
}

httplib::Server* g_server = nullptr;

int run_serve(const std::string& ckpt, const std::string& host, int port) {
  const fs::path path = resolve_checkpoint(ckpt);
  const InpaintService svc = InpaintService::from_checkpoint(path);
  httplib::Server server;
  install_routes(server, svc);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  if (!server.bind_to_port(host, port)) throw IoError(fmt::format("cannot bind {}:{}", host, port));
  spdlog::info("serving {} on http://{}:{}", path.string(), host, port);
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Texture-aware multi-GAN image inpainting"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Progressive freeze-and-grow training");
  c_train->add_option("--config", train.config, "TrainConfig JSON file");
  c_train->add_option("--resume", train.resume, "Resume from a training checkpoint");
  c_train->add_option("--init-from", train.init_from,
                      "Start a new schedule from the weights of a checkpoint");
  c_train->add_option("--data", train.data, "Image folder (overrides data.* in the config)");
  c_train->add_option("--out", train.out, "Checkpoint path (overrides config)");
  c_train->add_option("--log", train.log, "Loss CSV path (overrides config)");
  c_train->add_option("--max-steps", train.max_steps, "Stop after this many steps");

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Inpaint one image");
  c_infer->add_option("--ckpt", infer.ckpt, "Checkpoint (default: $TAMGAN_CHECKPOINT)");
  c_infer->add_option("--image", infer.image, "Input PNG")->required();
  c_infer->add_option("--mask", infer.mask, "Mask PNG, 255 known / 0 hole");
  c_infer->add_option("--out", infer.out, "Output PNG")->required();
  c_infer->add_option("--pyramid", infer.pyramid, "Directory for O32..O256");
  c_infer->add_flag("--no-composite", infer.no_composite, "Keep generated known pixels");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "MAE/PSNR/SSIM per mask bin");
  c_eval->add_option("--ckpt", eval.ckpt, "Checkpoint (default: $TAMGAN_CHECKPOINT)");
  eval.data.add(c_eval);
  c_eval->add_option("--bins", eval.bins, "all or a comma list, e.g. 10-20,30-40")
      ->capture_default_str();
  c_eval->add_option("--seed", eval.seed, "Mask seed")->capture_default_str();
  c_eval->add_option("--limit", eval.limit, "Evaluate at most N images");
  c_eval->add_option("--out", eval.out, "report.json or report.csv (default: stdout JSON)");
  c_eval->add_flag("--raw", eval.raw, "Score the raw generator output");

  std::string bench_ckpt;
  int bench_iters = 100, bench_warmup = 2;
  bool bench_json = false;
  auto* c_bench = app.add_subcommand("bench", "Parameter, FLOP and latency report");
  c_bench->add_option("--ckpt", bench_ckpt, "Checkpoint (default: $TAMGAN_CHECKPOINT)");
  c_bench->add_option("--iters", bench_iters)->capture_default_str()->check(CLI::PositiveNumber);
  c_bench->add_option("--warmup", bench_warmup)->capture_default_str()->check(CLI::NonNegativeNumber);
  c_bench->add_flag("--json", bench_json);

  MaskgenArgs mg;
  auto* c_mask = app.add_subcommand("maskgen", "Write mask PNGs");
  c_mask->add_option("--bin", mg.bin, "all or a comma list of bins")->capture_default_str();
  c_mask->add_option("--kind", mg.kind)
      ->check(CLI::IsMember({"freeform", "block", "outpaint"}))
      ->capture_default_str();
  c_mask->add_option("--n", mg.n)->capture_default_str()->check(CLI::PositiveNumber);
  c_mask->add_option("--size", mg.size)->capture_default_str();
  c_mask->add_option("--seed", mg.seed)->capture_default_str();
  c_mask->add_option("--out", mg.out)->required();

  std::string lbp_image, lbp_out;
  int lbp_dilation = 1;
  bool lbp_surrogate_flag = false;
  auto* c_lbp = app.add_subcommand("lbp", "Write the LBP code map of an image (valid region: shrinks by the dilation on each side)");
  c_lbp->add_option("--image", lbp_image)->required();
  c_lbp->add_option("--out", lbp_out)->required();
  c_lbp->add_option("--dilation", lbp_dilation)->capture_default_str()->check(CLI::PositiveNumber);
  c_lbp->add_flag("--surrogate", lbp_surrogate_flag, "Use the differentiable form");

  std::string serve_ckpt, serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* c_serve = app.add_subcommand("serve", "HTTP inference service");
  c_serve->add_option("--ckpt", serve_ckpt, "Checkpoint (default: $TAMGAN_CHECKPOINT)");
  c_serve->add_option("--host", serve_host)->capture_default_str();
  c_serve->add_option("--port", serve_port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*c_train) return run_train(train);
    if (*c_infer) return run_infer(infer);
    if (*c_eval) return run_eval(eval);
    if (*c_bench) return run_bench(bench_ckpt, bench_iters, bench_warmup, bench_json);
    if (*c_mask) return run_maskgen(mg);
    if (*c_lbp) return run_lbp(lbp_image, lbp_out, lbp_dilation, lbp_surrogate_flag);
    if (*c_serve) return run_serve(serve_ckpt, serve_host, serve_port);
  } catch (const InvalidInput& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

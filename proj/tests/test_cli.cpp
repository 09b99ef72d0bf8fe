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

// Drives the installed `tamgan` binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "tamgan/image_io.hpp"
#include "tamgan/masks.hpp"

#ifndef TAMGAN_CLI_PATH
#error "TAMGAN_CLI_PATH must point at the tamgan executable"
#endif

using namespace tamgan;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr
};

CliRun run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " TAMGAN_CLI_PATH " " + args + " 2>&1";
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Image8 noise_image(int w, int h, std::uint64_t seed) {
  Image8 im(w, h, 3);
  std::mt19937_64 rng(seed);
  for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return im;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("tamgan_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "images");
    for (int i = 0; i < 10; ++i) {
      write_png(dir_ / "images" / ("img_" + std::to_string(i) + ".png"),
                noise_image(256, 256, 100 + i));
    }
    std::ofstream(dir_ / "cfg.json") << R"({
      "batch_size": 2,
      "steps_per_stage": {"32": 2, "64": 1, "128": 1, "256": 1},
      "data": {"kind": "synthetic", "count": 4}
    })";
    train_ = run(fmt::format("--log-level warn train --config {} --out {} --log {}",
                             (dir_ / "cfg.json").string(), ckpt().string(),
                             (dir_ / "loss.csv").string()));
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path ckpt() { return dir_ / "ck.bin"; }
  static std::string p(const std::string& rel) { return (dir_ / rel).string(); }

  static fs::path dir_;
  static CliRun train_;
};
fs::path Cli::dir_;
CliRun Cli::train_;

}  // namespace

TEST_F(Cli, TrainWritesCheckpointAndLog) {
  ASSERT_EQ(train_.code, 0) << train_.output;
  EXPECT_TRUE(fs::exists(ckpt()));
  std::ifstream in(dir_ / "loss.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

TEST_F(Cli, ResumeOfFinishedRunDoesNothing) {
  ASSERT_EQ(train_.code, 0);
  const auto r = run(fmt::format("train --config {} --resume {}", p("cfg.json"), ckpt().string()));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("0 steps done"), std::string::npos) << r.output;
}

TEST_F(Cli, UnknownConfigKeyIsAConfigError) {
  std::ofstream(dir_ / "bad.json") << R"({"batch_sise": 2})";
  const auto r = run("train --config " + p("bad.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("batch_sise"), std::string::npos) << r.output;
}

TEST_F(Cli, InferWritesSameSizePng) {
  ASSERT_EQ(train_.code, 0);
  write_png(dir_ / "mask.png", mask_to_image(gen_freeform(256, 256, MaskBin::r30_40, 3)));
  const auto r = run(fmt::format("infer --ckpt {} --image {} --mask {} --out {} --pyramid {}",
                                 ckpt().string(), p("images/img_0.png"), p("mask.png"),
                                 p("out.png"), p("pyr")));
  ASSERT_EQ(r.code, 0) << r.output;
  const Image8 out = read_png(dir_ / "out.png");
  EXPECT_EQ(out.width, 256);
  EXPECT_EQ(out.height, 256);
  for (int s : {32, 64, 128, 256}) {
    EXPECT_EQ(read_png(dir_ / "pyr" / ("O" + std::to_string(s) + ".png")).width, s);
  }
}

TEST_F(Cli, InferTakesCheckpointFromEnvironment) {
  ASSERT_EQ(train_.code, 0);
  write_png(dir_ / "mask_env.png", mask_to_image(gen_block(256, 256, 4)));
  const auto r = run(fmt::format("infer --image {} --mask {} --out {}", p("images/img_1.png"),
                                 p("mask_env.png"), p("out_env.png")),
                     "TAMGAN_CHECKPOINT=" + ckpt().string());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir_ / "out_env.png"));
}

TEST_F(Cli, InferSizeMismatchFails) {
  ASSERT_EQ(train_.code, 0);
  write_png(dir_ / "small_mask.png", Image8(128, 128, 1, 255));
  const auto r = run(fmt::format("infer --ckpt {} --image {} --mask {} --out {}", ckpt().string(),
                                 p("images/img_0.png"), p("small_mask.png"), p("never.png")));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("size mismatch: image is 256x256, mask is 128x128"), std::string::npos)
      << r.output;
  EXPECT_FALSE(fs::exists(dir_ / "never.png"));
}

TEST_F(Cli, InferWithoutCheckpointFails) {
  const auto r = run(fmt::format("infer --image {} --out {}", p("images/img_0.png"), p("x.png")),
                     "env -u TAMGAN_CHECKPOINT");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("TAMGAN_CHECKPOINT"), std::string::npos) << r.output;
}

TEST_F(Cli, EvalJsonPerBinMeansMatchItems) {
  ASSERT_EQ(train_.code, 0);
  const auto r = run(fmt::format("--log-level warn eval --ckpt {} --data {} --seed 5 --out {}",
                                 ckpt().string(), p("images"), p("report.json")));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(dir_ / "report.json");
  const auto j = nlohmann::json::parse(in);
  ASSERT_EQ(j["items"].size(), 40u);  // 10 images x 4 bins
  std::map<std::string, std::array<double, 4>> acc;  // mae, psnr, ssim, count
  for (const auto& it : j["items"]) {
    auto& a = acc[it["bin"].get<std::string>()];
    a[0] += it["mae"].get<double>();
    a[1] += it["psnr"].get<double>();
    a[2] += it["ssim"].get<double>();
    a[3] += 1;
  }
  ASSERT_EQ(acc.size(), 4u);
  for (const auto& [bin, a] : acc) {
    const auto& b = j["bins"][bin];
    EXPECT_EQ(b["count"].get<double>(), a[3]);
    EXPECT_NEAR(b["mae"].get<double>(), a[0] / a[3], 1e-12) << bin;
    EXPECT_NEAR(b["psnr"].get<double>(), a[1] / a[3], 1e-9) << bin;
    EXPECT_NEAR(b["ssim"].get<double>(), a[2] / a[3], 1e-12) << bin;
  }
}

TEST_F(Cli, EvalCsvAndBinSelection) {
  ASSERT_EQ(train_.code, 0);
  const auto r = run(fmt::format("eval --ckpt {} --synthetic 3 --bins 20-30 --out {}",
                                 ckpt().string(), p("report.csv")));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(dir_ / "report.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_NE(ss.str().find("20-30"), std::string::npos);
  EXPECT_EQ(ss.str().find("30-40"), std::string::npos);
}

TEST_F(Cli, MaskgenHitsRequestedBin) {
  const auto r = run("maskgen --bin 30-40 --n 6 --seed 7 --out " + p("masks"));
  ASSERT_EQ(r.code, 0) << r.output;
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "masks")) {
    const Mask m = mask_from_image(read_png(e.path(), 1));
    EXPECT_EQ(classify(m), MaskBin::r30_40) << e.path();
    ++n;
  }
  EXPECT_EQ(n, 6);
  // Same seed, same bytes.
  ASSERT_EQ(run("maskgen --bin 30-40 --n 6 --seed 7 --out " + p("masks2")).code, 0);
  EXPECT_EQ(read_file(dir_ / "masks" / "mask_00003.png"),
            read_file(dir_ / "masks2" / "mask_00003.png"));
}

TEST_F(Cli, MaskgenRejectsUnknownBin) {
  EXPECT_NE(run("maskgen --bin 5-15 --out " + p("m3")).code, 0);
}

TEST_F(Cli, BenchReportsEfficiency) {
  ASSERT_EQ(train_.code, 0);
  const auto r = run("--log-level off bench --json --iters 1 --warmup 0 --ckpt " + ckpt().string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(r.output);
  EXPECT_NEAR(j["params"].get<double>(), 3.0e6, 0.45e6);
  EXPECT_EQ(j["iters"], 1);
  EXPECT_GT(j["mean_ms"].get<double>(), 0);
  EXPECT_NEAR(j["gflops"].get<double>(), 2 * j["giga_macs"].get<double>(), 1e-9);
}

TEST_F(Cli, LbpWritesCodeMap) {
  const auto r = run(fmt::format("lbp --image {} --out {}", p("images/img_2.png"), p("lbp.png")));
  ASSERT_EQ(r.code, 0) << r.output;
  const Image8 codes = read_png(dir_ / "lbp.png", 1);
  // Border pixels lack a full neighbourhood.
  EXPECT_EQ(codes.width, 254);
  EXPECT_EQ(codes.height, 254);
  const auto s = run(fmt::format("lbp --surrogate --dilation 2 --image {} --out {}",
                                 p("images/img_2.png"), p("lbp_s.png")));
  ASSERT_EQ(s.code, 0) << s.output;
  EXPECT_EQ(read_png(dir_ / "lbp_s.png", 1).width, 252);
}

TEST_F(Cli, ServeWithoutCheckpointFailsAtStartup) {
  const auto r = run("serve --port 0", "env -u TAMGAN_CHECKPOINT");
  EXPECT_EQ(r.code, 2);
  const auto m = run("serve --port 0 --ckpt " + p("missing.bin"));
  EXPECT_EQ(m.code, 1);
}

TEST_F(Cli, NoSubcommandIsAnError) { EXPECT_NE(run("").code, 0); }

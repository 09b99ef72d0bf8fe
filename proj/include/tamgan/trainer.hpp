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

// Progressive freeze-and-grow training. Stages run in ascending order; only
// the current stage's generator and discriminator are updated, lower
// generators run in inference mode to provide their outputs.

#pragma once

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tamgan/adam.hpp"
#include "tamgan/checkpoint.hpp"
#include "tamgan/dataset.hpp"
#include "tamgan/losses.hpp"
#include "tamgan/masks.hpp"
#include "tamgan/metrics.hpp"
#include "tamgan/nets.hpp"

namespace tamgan {

struct DataConfig {
  std::string kind = "synthetic";  // synthetic | folder
  std::size_t count = 500;         // synthetic only
  std::uint64_t seed = 1;          // synthetic only
  std::string root;                // folder only
  std::string split = "train";
};

struct MaskConfig {
  std::string kind = "freeform";  // freeform | block | outpaint
  std::vector<MaskBin> bins{kMaskBins.begin(), kMaskBins.end()};
};

struct EarlyStopConfig {
  int patience = 0;  // 0 disables
  int eval_every = 100;
  int val_count = 16;
};

struct TrainConfig {
  std::vector<int> stages{32, 64, 128, 256};
  std::map<int, int> epochs_per_stage{{32, 1}, {64, 1}, {128, 1}, {256, 1}};
  // Overrides epochs_per_stage for the listed stages.
  std::map<int, std::int64_t> steps_per_stage;
  int batch_size = 8;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  LossWeights weights;
  bool texture_loss = true;
  LbpConfig lbp;
  MaskConfig masks;
  bool blind_mode = false;
  std::uint64_t seed = 0;
  DataConfig data;
  EarlyStopConfig early_stop;
  // Outputs; excluded from the config hash.
  std::string log_csv;
  std::string checkpoint;
  std::int64_t checkpoint_every = 0;

  void validate() const {
    if (stages.empty()) throw ConfigError("stage list is empty");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      stage_index(stages[i]);
      if (i > 0 && stages[i] <= stages[i - 1]) {
        throw ConfigError("stage order must be strictly ascending");
      }
    }
    for (int s : stages) {
      if (!steps_per_stage.contains(s) && !epochs_per_stage.contains(s)) {
        throw ConfigError(fmt::format("no epochs or steps configured for stage {}", s));
      }
    }
    for (const auto& [s, e] : epochs_per_stage)
      if (e < 0) throw ConfigError("epochs must be >= 0");
    for (const auto& [s, n] : steps_per_stage)
      if (n < 0) throw ConfigError("steps must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr_g > 0) || !(lr_d > 0)) throw ConfigError("learning rates must be > 0");
    adam(lr_g).validate();
    weights.validate();
    if (lbp.dilation < 1) throw ConfigError("LBP dilation must be >= 1");
    if (masks.kind != "freeform" && masks.kind != "block" && masks.kind != "outpaint") {
      throw ConfigError("mask kind must be freeform, block or outpaint");
    }
    if (masks.kind == "freeform" && masks.bins.empty()) throw ConfigError("no mask bins");
    for (MaskBin b : masks.bins)
      if (b == MaskBin::other) throw ConfigError("'other' is not a trainable mask bin");
    if (data.kind != "synthetic" && data.kind != "folder") {
      throw ConfigError("data.kind must be synthetic or folder");
    }
    if (early_stop.patience < 0 || early_stop.eval_every < 1 || early_stop.val_count < 1) {
      throw ConfigError("invalid early_stop settings");
    }
  }

  AdamConfig adam(double lr) const { return {lr, adam_beta1, adam_beta2, adam_eps}; }

  nlohmann::json to_json() const {
    using nlohmann::json;
    json epochs = json::object(), steps = json::object();
    for (const auto& [s, e] : epochs_per_stage) epochs[std::to_string(s)] = e;
    for (const auto& [s, n] : steps_per_stage) steps[std::to_string(s)] = n;
    json bins = json::array();
    for (MaskBin b : masks.bins) bins.push_back(to_string(b));
    return {
        {"stages", stages},
        {"epochs_per_stage", epochs},
        {"steps_per_stage", steps},
        {"batch_size", batch_size},
        {"lr_g", lr_g},
        {"lr_d", lr_d},
        {"adam_beta1", adam_beta1},
        {"adam_beta2", adam_beta2},
        {"adam_eps", adam_eps},
        {"loss_weights", {{"adv", weights.adv}, {"rec", weights.rec}, {"texture", weights.texture}}},
        {"texture_loss", texture_loss},
        {"lbp", {{"dilation", lbp.dilation}, {"ties_as_one", lbp.ties_as_one}}},
        {"masks", {{"kind", masks.kind}, {"bins", bins}}},
        {"blind_mode", blind_mode},
        {"seed", seed},
        {"data",
         {{"kind", data.kind},
          {"count", data.count},
          {"seed", data.seed},
          {"root", data.root},
          {"split", data.split}}},
        {"early_stop",
         {{"patience", early_stop.patience},
          {"eval_every", early_stop.eval_every},
          {"val_count", early_stop.val_count}}},
        {"log_csv", log_csv},
        {"checkpoint", checkpoint},
        {"checkpoint_every", checkpoint_every},
    };
  }

  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    const nlohmann::json ref = c.to_json();
    try {
      check_keys(j, ref, "");
      auto get = [&](const char* k, auto& dst) {
        if (j.contains(k)) j.at(k).get_to(dst);
      };
      get("stages", c.stages);
      if (j.contains("epochs_per_stage")) {
        c.epochs_per_stage.clear();
        for (const auto& [k, v] : j.at("epochs_per_stage").items())
          c.epochs_per_stage[std::stoi(k)] = v.get<int>();
      }
      if (j.contains("steps_per_stage")) {
        for (const auto& [k, v] : j.at("steps_per_stage").items())
          c.steps_per_stage[std::stoi(k)] = v.get<std::int64_t>();
      }
      get("batch_size", c.batch_size);
      get("lr_g", c.lr_g);
      get("lr_d", c.lr_d);
      get("adam_beta1", c.adam_beta1);
      get("adam_beta2", c.adam_beta2);
      get("adam_eps", c.adam_eps);
      if (j.contains("loss_weights")) {
        const auto& w = j.at("loss_weights");
        c.weights.adv = w.value("adv", c.weights.adv);
        c.weights.rec = w.value("rec", c.weights.rec);
        c.weights.texture = w.value("texture", c.weights.texture);
      }
      get("texture_loss", c.texture_loss);
      if (j.contains("lbp")) {
        c.lbp.dilation = j.at("lbp").value("dilation", c.lbp.dilation);
        c.lbp.ties_as_one = j.at("lbp").value("ties_as_one", c.lbp.ties_as_one);
      }
      if (j.contains("masks")) {
        const auto& m = j.at("masks");
        c.masks.kind = m.value("kind", c.masks.kind);
        if (m.contains("bins")) {
          c.masks.bins.clear();
          for (const auto& b : m.at("bins")) c.masks.bins.push_back(parse_mask_bin(b.get<std::string>()));
        }
      }
      get("blind_mode", c.blind_mode);
      get("seed", c.seed);
      if (j.contains("data")) {
        const auto& d = j.at("data");
        c.data.kind = d.value("kind", c.data.kind);
        c.data.count = d.value("count", c.data.count);
        c.data.seed = d.value("seed", c.data.seed);
        c.data.root = d.value("root", c.data.root);
        c.data.split = d.value("split", c.data.split);
      }
      if (j.contains("early_stop")) {
        const auto& e = j.at("early_stop");
        c.early_stop.patience = e.value("patience", c.early_stop.patience);
        c.early_stop.eval_every = e.value("eval_every", c.early_stop.eval_every);
        c.early_stop.val_count = e.value("val_count", c.early_stop.val_count);
      }
      get("log_csv", c.log_csv);
      get("checkpoint", c.checkpoint);
      get("checkpoint_every", c.checkpoint_every);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed training config: ") + e.what());
    } catch (const std::invalid_argument&) {
      throw ConfigError("malformed stage key in training config");
    }
    c.validate();
    return c;
  }

  static TrainConfig load(const std::filesystem::path& p) {
    try {
      return from_json(nlohmann::json::parse(read_file(p)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(p.string() + ": " + e.what());
    }
  }

  // FNV-1a of the canonical JSON without the output-location keys.
  std::uint64_t hash() const {
    nlohmann::json j = to_json();
    j.erase("log_csv");
    j.erase("checkpoint");
    j.erase("checkpoint_every");
    return fnv1a(j.dump());
  }

 private:
  static void check_keys(const nlohmann::json& j, const nlohmann::json& ref,
                         const std::string& path) {
    if (!j.is_object()) throw ConfigError("config section '" + path + "' must be an object");
    for (const auto& [k, v] : j.items()) {
      if (!ref.contains(k)) throw ConfigError("unknown config key '" + path + k + "'");
      const bool keyed_by_stage = k == "epochs_per_stage" || k == "steps_per_stage";
      if (v.is_object() && !keyed_by_stage) check_keys(v, ref.at(k), path + k + ".");
    }
  }
};

inline Dataset open_dataset(const DataConfig& d, bool validation = false) {
  if (d.kind == "synthetic") {
    return Dataset::synthetic(d.count, validation ? mix_seed({d.seed, 0x5eedULL}) : d.seed);
  }
  return Dataset::folder(d.root, validation ? "test" : d.split);
}

struct StepRecord {
  std::int64_t global_step = 0;
  int stage = 0;
  std::int64_t stage_step = 0;
  StageLosses losses;
};

// Appends step,stage,l_rec,l_adv,l_dis,l_texture rows; l_texture is empty
// below stage 256.
class LossLog {
 public:
  explicit LossLog(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw IoError("cannot open loss log " + path.string());
    if (fresh) out_ << "step,stage,l_rec,l_adv,l_dis,l_texture\n";
  }

  void write(const StepRecord& r) {
    out_ << fmt::format("{},{},{:.9g},{:.9g},{:.9g},", r.global_step, r.stage, r.losses.l_rec,
                        r.losses.l_adv, r.losses.l_dis);
    if (r.losses.l_texture) out_ << fmt::format("{:.9g}", *r.losses.l_texture);
    out_ << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset data)
      : cfg_(std::move(cfg)), data_(std::move(data)), nets_(cfg_.blind_mode) {
    cfg_.validate();
    if (data_.empty()) throw ConfigError("training dataset is empty");
    nets_.init(mix_seed({cfg_.seed, 1}));
    rng_.seed(mix_seed({cfg_.seed, 2}));
    open_log();
    enter_stage();
  }

  // Resumes exactly where `ck` left off. The configuration must hash to the
  // value recorded in the checkpoint.
  Trainer(TrainConfig cfg, Dataset data, const Checkpoint& ck)
      : cfg_(std::move(cfg)), data_(std::move(data)), nets_(cfg_.blind_mode) {
    cfg_.validate();
    if (data_.empty()) throw ConfigError("training dataset is empty");
    const auto& m = ck.meta;
    if (m.value("format", "") != "tamgan.checkpoint") throw IoError("not a training checkpoint");
    if (m.at("config_hash").get<std::string>() != fmt::format("{:016x}", cfg_.hash())) {
      throw ConfigError("config hash mismatch: checkpoint was written with a different config");
    }
    restore_networks(nets_, ck);
    cursor_ = m.at("stage_cursor").get<std::size_t>();
    stage_step_ = m.at("stage_step").get<std::int64_t>();
    global_step_ = m.at("global_step").get<std::int64_t>();
    std::istringstream(m.at("rng").get<std::string>()) >> rng_;
    best_psnr_ = m.at("early_stop").at("best").is_null()
                     ? std::nullopt
                     : std::optional<double>(m.at("early_stop").at("best").get<double>());
    bad_evals_ = m.at("early_stop").at("bad").get<int>();
    open_log();
    if (!finished()) {
      make_optimizers();
      restore_optimizer(*opt_g_, "opt.G", m.at("opt_g_steps").get<std::int64_t>(), ck);
      restore_optimizer(*opt_d_, "opt.D", m.at("opt_d_steps").get<std::int64_t>(), ck);
    }
  }

  // Starts a new schedule on top of network weights (and trained flags)
  // taken from `ck`, e.g. to train only the last stage under a different
  // loss configuration.
  static Trainer from_pretrained(TrainConfig cfg, Dataset data, const Checkpoint& ck) {
    Trainer t(std::move(cfg), std::move(data), Fresh{});
    restore_networks(t.nets_, ck);
    if (t.nets_.blind != t.cfg_.blind_mode) throw ConfigError("blind_mode differs from checkpoint");
    t.enter_stage();
    return t;
  }

  const TrainConfig& config() const { return cfg_; }
  MultiGan<float>& nets() { return nets_; }
  const MultiGan<float>& nets() const { return nets_; }
  bool finished() const { return cursor_ >= cfg_.stages.size(); }
  int current_stage() const { return finished() ? 0 : cfg_.stages[cursor_]; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t stage_step() const { return stage_step_; }

  std::int64_t steps_for_stage(int stage) const {
    if (auto it = cfg_.steps_per_stage.find(stage); it != cfg_.steps_per_stage.end()) return it->second;
    const std::int64_t per_epoch =
        (static_cast<std::int64_t>(data_.size()) + cfg_.batch_size - 1) / cfg_.batch_size;
    return per_epoch * cfg_.epochs_per_stage.at(stage);
  }

  void on_step(std::function<void(const StepRecord&)> cb) { callback_ = std::move(cb); }

  // One discriminator update followed by one generator update at the
  // current stage.
  StepRecord step() {
    if (finished()) throw StateError("training already finished");
    const int stage = current_stage();
    std::vector<std::size_t> idx;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const std::int64_t pos = stage_step_ * cfg_.batch_size + b;
      const std::int64_t n = static_cast<std::int64_t>(data_.size());
      idx.push_back(permutation(pos / n)[static_cast<std::size_t>(pos % n)]);
    }
    const Tensor<float> images = data_.batch(idx);
    const Tensor<float> masks = draw_masks(cfg_.batch_size);

    StepRecord rec;
    rec.stage = stage;
    rec.losses = update(images, masks);
    ++stage_step_;
    ++global_step_;
    rec.global_step = global_step_;
    rec.stage_step = stage_step_;
    if (log_) log_->write(rec);
    if (callback_) callback_(rec);

    bool stop_early = false;
    if (cfg_.early_stop.patience > 0 && stage_step_ % cfg_.early_stop.eval_every == 0) {
      stop_early = early_stop_check();
    }
    if (stage_step_ >= steps_for_stage(stage) || stop_early) {
      if (stop_early) spdlog::info("stage {}: early stop at step {}", stage, stage_step_);
      finish_stage();
    } else if (cfg_.checkpoint_every > 0 && global_step_ % cfg_.checkpoint_every == 0) {
      save_checkpoint();
    }
    return rec;
  }

  // The D/G update on an explicit batch: images (B,3,256,256) in [-1, 1],
  // masks (B,1,256,256). Does not advance the schedule.
  StageLosses update(const Tensor<float>& images, const Tensor<float>& masks) {
    if (finished()) throw StateError("training already finished");
    const int stage = current_stage();
    const int k = stage_index(stage);
    validate_pyramid_input(images.shape(), masks.shape());
    Generator<float>& G = nets_.generators[k];
    Discriminator<float>& D = nets_.discriminators[k];

    const Tensor<float> corrupted = apply_mask(images, masks);
    PyramidOutput<float> lower;
    if (k > 0) lower = forward_pyramid(nets_, corrupted, masks, kStageResolutions[k - 1]);
    const Tensor<float> input = stage_image_input(corrupted, masks, stage, nets_.blind);
    GeneratorInputs<float> in;
    in.image = &input;
    if (lower.images[0]) in.o32 = &*lower.images[0];
    if (lower.images[1]) in.o64 = &*lower.images[1];
    if (lower.images[2]) in.o128 = &*lower.images[2];
    const Tensor<float> target = stage == 256 ? images : resize_area(images, stage, stage);

    const Tensor<float> out = G.forward_train(in);

    // Discriminator: real then fake, gradients accumulated.
    opt_d_->zero_grad();
    const Tensor<float> real = D.forward_train(target);
    D.backward(detail::mean_squared_offset_grad(real, 1.0f), false);
    const Tensor<float> fake = D.forward_train(out);
    D.backward(detail::mean_squared_offset_grad(fake, 0.0f), false);
    StageLosses l;
    l.l_dis = lsgan_d_loss(real, fake);
    opt_d_->step();

    // Generator.
    const Tensor<float> scores = D.forward_train(out);
    const auto adv = lsgan_g_loss_with_grad(scores);
    Tensor<float> dadv = D.backward(adv.grad, true);
    const auto rec = l1_loss_with_grad(out, target);
    l.l_adv = adv.value;
    l.l_rec = rec.value;
    Tensor<float> dout(out.shape());
    const float wa = static_cast<float>(cfg_.weights.adv);
    const float wr = static_cast<float>(cfg_.weights.rec);
    for (std::size_t i = 0; i < dout.size(); ++i) dout[i] = wa * dadv[i] + wr * rec.grad[i];
    if (stage == 256 && cfg_.texture_loss) {
      const auto tex = texture_loss_with_grad(out, target, cfg_.lbp);
      l.l_texture = tex.value;
      const float wt = static_cast<float>(cfg_.weights.texture);
      for (std::size_t i = 0; i < dout.size(); ++i) dout[i] += wt * tex.grad[i];
    }
    l.l_overall = overall_loss(stage, l, cfg_.weights);
    check_finite(l, stage);

    opt_g_->zero_grad();
    G.backward(dout);
    opt_g_->step();
    G.release_cache();
    D.release_cache();
    return l;
  }

  // Runs the remainder of the current stage.
  void train_stage(int stage) {
    if (stage != current_stage()) {
      throw StateError(fmt::format("stage {} is not the current stage ({})", stage, current_stage()));
    }
    while (!finished() && current_stage() == stage) step();
  }

  // Runs the schedule to completion, or for at most `max_steps` steps.
  // Returns the number of steps taken.
  std::int64_t run(std::int64_t max_steps = -1) {
    std::int64_t done = 0;
    while (!finished() && (max_steps < 0 || done < max_steps)) {
      step();
      ++done;
    }
    save_checkpoint();
    return done;
  }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.meta = {
        {"format", "tamgan.checkpoint"},
        {"config", cfg_.to_json()},
        {"config_hash", fmt::format("{:016x}", cfg_.hash())},
        {"blind", nets_.blind},
        {"trained", nets_.trained},
        {"stage_cursor", cursor_},
        {"stage_step", stage_step_},
        {"global_step", global_step_},
        {"early_stop", {{"best", best_psnr_ ? nlohmann::json(*best_psnr_) : nlohmann::json()},
                        {"bad", bad_evals_}}},
        {"opt_g_steps", opt_g_ ? opt_g_->steps() : 0},
        {"opt_d_steps", opt_d_ ? opt_d_->steps() : 0},
    };
    std::ostringstream rng;
    rng << rng_;
    ck.meta["rng"] = rng.str();
    append_networks(ck, const_cast<MultiGan<float>&>(nets_));
    if (opt_g_) append_optimizer(ck, *opt_g_, "opt.G");
    if (opt_d_) append_optimizer(ck, *opt_d_, "opt.D");
    return ck;
  }

  void save_checkpoint() const {
    if (cfg_.checkpoint.empty()) return;
    checkpoint().save(cfg_.checkpoint);
  }

  // ---- checkpoint helpers shared with inference ----

  static void append_networks(Checkpoint& ck, MultiGan<float>& nets) {
    for (auto& g : nets.generators)
      for (const auto& p : g.parameters()) ck.tensors.emplace_back(p.name, *p.value);
    for (auto& d : nets.discriminators) {
      for (const auto& p : d.parameters()) ck.tensors.emplace_back(p.name, *p.value);
      for (const auto& b : d.buffers()) ck.tensors.emplace_back(b.name, *b.value);
    }
  }

  static void restore_networks(MultiGan<float>& nets, const Checkpoint& ck) {
    const bool blind = ck.meta.value("blind", false);
    if (blind != nets.blind) nets = MultiGan<float>(blind);
    for (auto& g : nets.generators)
      for (const auto& p : g.parameters()) copy_into(*p.value, ck.get(p.name), p.name);
    for (auto& d : nets.discriminators) {
      for (const auto& p : d.parameters()) copy_into(*p.value, ck.get(p.name), p.name);
      for (const auto& b : d.buffers()) copy_into(*b.value, ck.get(b.name), b.name);
    }
    nets.trained = ck.meta.at("trained").get<std::array<bool, 4>>();
  }

 private:
  struct Fresh {};
  Trainer(TrainConfig cfg, Dataset data, Fresh)
      : cfg_(std::move(cfg)), data_(std::move(data)), nets_(cfg_.blind_mode) {
    cfg_.validate();
    if (data_.empty()) throw ConfigError("training dataset is empty");
    rng_.seed(mix_seed({cfg_.seed, 2}));
    open_log();
  }

  static void copy_into(Tensor<float>& dst, const Tensor<float>& src, const std::string& name) {
    if (dst.shape() != src.shape()) {
      throw IoError("checkpoint tensor '" + name + "' has shape " + src.shape().str() +
                    ", expected " + dst.shape().str());
    }
    dst = src;
  }

  static void append_optimizer(Checkpoint& ck, const Adam<float>& opt, const std::string& prefix) {
    for (std::size_t i = 0; i < opt.params().size(); ++i) {
      ck.tensors.emplace_back(prefix + ".m." + opt.params()[i].name, opt.first_moments()[i]);
      ck.tensors.emplace_back(prefix + ".v." + opt.params()[i].name, opt.second_moments()[i]);
    }
  }

  static void restore_optimizer(Adam<float>& opt, const std::string& prefix, std::int64_t steps,
                                const Checkpoint& ck) {
    for (std::size_t i = 0; i < opt.params().size(); ++i) {
      const std::string& n = opt.params()[i].name;
      copy_into(opt.first_moments()[i], ck.get(prefix + ".m." + n), n);
      copy_into(opt.second_moments()[i], ck.get(prefix + ".v." + n), n);
    }
    opt.set_steps(steps);
  }

  void open_log() {
    if (!cfg_.log_csv.empty()) log_ = std::make_unique<LossLog>(cfg_.log_csv);
  }

  void make_optimizers() {
    const int k = stage_index(current_stage());
    opt_g_ = std::make_unique<Adam<float>>(nets_.generators[k].parameters(), cfg_.adam(cfg_.lr_g));
    opt_d_ = std::make_unique<Adam<float>>(nets_.discriminators[k].parameters(),
                                           cfg_.adam(cfg_.lr_d));
  }

  void enter_stage() {
    while (!finished() && steps_for_stage(current_stage()) == 0) {
      nets_.trained[stage_index(current_stage())] = true;
      ++cursor_;
    }
    if (finished()) return;
    const int k = stage_index(current_stage());
    for (int s = 0; s < k; ++s) {
      if (!nets_.trained[s]) {
        throw StateError(fmt::format("stage {} requires trained stage {}", current_stage(),
                                     kStageResolutions[s]));
      }
    }
    stage_step_ = 0;
    best_psnr_.reset();
    bad_evals_ = 0;
    perm_epoch_ = -1;
    make_optimizers();
    spdlog::info("stage {}: {} steps", current_stage(), steps_for_stage(current_stage()));
  }

  void finish_stage() {
    nets_.trained[stage_index(current_stage())] = true;
    ++cursor_;
    opt_g_.reset();
    opt_d_.reset();
    enter_stage();
    save_checkpoint();
  }

  // Sample order for one epoch of the current stage; depends only on the
  // seed, the stage and the epoch number.
  const std::vector<std::size_t>& permutation(std::int64_t epoch) {
    if (epoch != perm_epoch_) {
      perm_.resize(data_.size());
      std::iota(perm_.begin(), perm_.end(), std::size_t{0});
      std::mt19937_64 r(mix_seed({cfg_.seed, 3, static_cast<std::uint64_t>(current_stage()),
                                  static_cast<std::uint64_t>(epoch)}));
      std::shuffle(perm_.begin(), perm_.end(), r);
      perm_epoch_ = epoch;
    }
    return perm_;
  }

  Tensor<float> draw_masks(int count) {
    Tensor<float> out(count, 1, kImageSize, kImageSize);
    for (int b = 0; b < count; ++b) {
      Mask m = make_mask(cfg_.masks, rng_);
      std::copy(m.tensor().data(), m.tensor().data() + m.tensor().size(), out.sample(b));
    }
    return out;
  }

 public:
  static Mask make_mask(const MaskConfig& mc, std::mt19937_64& rng) {
    if (mc.kind == "block") return gen_block(kImageSize, kImageSize, rng());
    if (mc.kind == "outpaint") return gen_outpaint(kImageSize, kImageSize);
    std::uniform_int_distribution<std::size_t> pick(0, mc.bins.size() - 1);
    const MaskBin bin = mc.bins[pick(rng)];
    return gen_freeform(kImageSize, kImageSize, bin, rng());
  }

 private:
  // Returns true when validation PSNR at the current stage has not improved
  // for `patience` consecutive evaluations.
  bool early_stop_check() {
    if (!val_) {
      Dataset v = open_dataset(cfg_.data, true);
      if (v.empty()) return false;
      val_ = std::make_unique<Dataset>(std::move(v));
    }
    const int stage = current_stage();
    const std::size_t n = std::min<std::size_t>(val_->size(), cfg_.early_stop.val_count);
    std::mt19937_64 r(mix_seed({cfg_.seed, 4}));
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor<float> img = val_->item(i);
      const Mask m = make_mask(cfg_.masks, r);
      const Tensor<float> out =
          forward_pyramid(nets_, apply_mask(img, m.tensor()), m.tensor(), stage).at(stage);
      const Tensor<float> gt = stage == 256 ? img : resize_area(img, stage, stage);
      acc += std::min(psnr(to_unit(out), to_unit(gt)), 100.0);
    }
    const double mean = acc / static_cast<double>(n);
    if (!best_psnr_ || mean > *best_psnr_) {
      best_psnr_ = mean;
      bad_evals_ = 0;
      return false;
    }
    return ++bad_evals_ >= cfg_.early_stop.patience;
  }

  void check_finite(const StageLosses& l, int stage) const {
    const bool ok = std::isfinite(l.l_rec) && std::isfinite(l.l_adv) && std::isfinite(l.l_dis) &&
                    (!l.l_texture || std::isfinite(*l.l_texture));
    if (!ok) {
      throw NumericError(fmt::format(
          "non-finite loss at stage {} step {}: l_rec={} l_adv={} l_dis={} l_texture={}", stage,
          stage_step_ + 1, l.l_rec, l.l_adv, l.l_dis, l.l_texture ? *l.l_texture : 0.0));
    }
  }

  TrainConfig cfg_;
  Dataset data_;
  MultiGan<float> nets_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
  std::int64_t stage_step_ = 0;
  std::int64_t global_step_ = 0;
  std::optional<double> best_psnr_;
  int bad_evals_ = 0;
  std::unique_ptr<Adam<float>> opt_g_, opt_d_;
  std::vector<std::size_t> perm_;
  std::int64_t perm_epoch_ = -1;
  std::unique_ptr<LossLog> log_;
  std::unique_ptr<Dataset> val_;
  std::function<void(const StepRecord&)> callback_;
};

// Inference-only view of a checkpoint.
inline MultiGan<float> load_networks(const Checkpoint& ck) {
  MultiGan<float> nets(ck.meta.value("blind", false));
  Trainer::restore_networks(nets, ck);
  return nets;
}

inline MultiGan<float> load_networks(const std::filesystem::path& path) {
  return load_networks(Checkpoint::load(path));
}

}  // namespace tamgan

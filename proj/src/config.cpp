// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace lct {

namespace {

using nlohmann::json;

// Reads optional fields from one JSON object and rejects anything unread.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + where() + "." + key + "'");
    }
  }

  std::string where() const { return path_.empty() ? "<root>" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ModelConfig model_from(const json& j, const std::string& path) {
  ModelConfig c;
  ObjectReader r(j, path);
  r.read("d_model", c.d_model);
  r.read("heads", c.heads);
  r.read("blocks", c.blocks);
  r.read("latent_channels", c.latent_channels);
  r.read("patch_h", c.patch_h);
  r.read("patch_w", c.patch_w);
  r.read("patch_f", c.patch_f);
  r.read("vocab_size", c.vocab_size);
  r.read("mlp_ratio", c.mlp_ratio);
  r.read("freq_dim", c.freq_dim);
  r.read("rope_base", c.rope_base);
  r.finish();
  return c;
}

SceneConfig scene_from(const json& j, const std::string& path) {
  SceneConfig c;
  ObjectReader r(j, path);
  r.read("min_shots", c.min_shots);
  r.read("max_shots", c.max_shots);
  r.read("height", c.height);
  r.read("width", c.width);
  r.read("frames", c.frames);
  r.read("max_characters", c.max_characters);
  r.read("global_text_len", c.global_text_len);
  r.read("shot_text_len", c.shot_text_len);
  r.read("continuous_fraction", c.continuous_fraction);
  r.read("establishing_probability", c.establishing_probability);
  r.read("color_jitter", c.color_jitter);
  r.read("render_noise", c.render_noise);
  r.finish();
  return c;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},   {"heads", c.heads},         {"blocks", c.blocks},
          {"latent_channels", c.latent_channels}, {"patch_h", c.patch_h}, {"patch_w", c.patch_w},
          {"patch_f", c.patch_f},   {"vocab_size", c.vocab_size}, {"mlp_ratio", c.mlp_ratio},
          {"freq_dim", c.freq_dim}, {"rope_base", c.rope_base}};
}

nlohmann::json to_json(const SceneConfig& c) {
  return {{"min_shots", c.min_shots},
          {"max_shots", c.max_shots},
          {"height", c.height},
          {"width", c.width},
          {"frames", c.frames},
          {"max_characters", c.max_characters},
          {"global_text_len", c.global_text_len},
          {"shot_text_len", c.shot_text_len},
          {"continuous_fraction", c.continuous_fraction},
          {"establishing_probability", c.establishing_probability},
          {"color_jitter", c.color_jitter},
          {"render_noise", c.render_noise}};
}

nlohmann::json to_json(const TrainConfig& c) {
  const auto& o = c.optimizer;
  return {{"model", to_json(c.model)},
          {"scene", to_json(c.scene)},
          {"corpus_size", c.corpus_size},
          {"max_context_shots", c.max_context_shots},
          {"batch_size", c.batch_size},
          {"optimizer",
           {{"lr", o.lr},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"eps", o.eps},
            {"weight_decay", o.weight_decay},
            {"clip_norm", o.clip_norm},
            {"warmup_steps", o.warmup_steps},
            {"min_lr_ratio", o.min_lr_ratio}}},
          {"single_shot_ratio", c.single_shot_ratio},
          {"frame_substitution", c.frame_substitution},
          {"timestep", {{"mu", c.timestep_mu}, {"sigma", c.timestep_sigma}}},
          {"lct_steps", c.lct_steps},
          {"causal_steps", c.causal_steps},
          {"seed", c.seed},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every},
          {"sampling", {{"steps", c.sampling.steps}, {"history_tc", c.sampling.history_tc}}},
          {"eval",
           {{"consistency_scenes", c.eval.consistency_scenes},
            {"consistency_shots", c.eval.consistency_shots},
            {"tc_trials", c.eval.tc_trials},
            {"curve_every", c.eval.curve_every},
            {"curve_scenes", c.eval.curve_scenes},
            {"seed", c.eval.seed}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) { return model_from(j, "model"); }
SceneConfig scene_config_from_json(const nlohmann::json& j) { return scene_from(j, "scene"); }

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  ObjectReader r(j, "");
  if (const auto* m = r.child("model")) c.model = model_from(*m, "model");
  if (const auto* s = r.child("scene")) c.scene = scene_from(*s, "scene");
  r.read("corpus_size", c.corpus_size);
  r.read("max_context_shots", c.max_context_shots);
  r.read("batch_size", c.batch_size);
  if (const auto* o = r.child("optimizer")) {
    ObjectReader ro(*o, "optimizer");
    ro.read("lr", c.optimizer.lr);
    ro.read("beta1", c.optimizer.beta1);
    ro.read("beta2", c.optimizer.beta2);
    ro.read("eps", c.optimizer.eps);
    ro.read("weight_decay", c.optimizer.weight_decay);
    ro.read("clip_norm", c.optimizer.clip_norm);
    ro.read("warmup_steps", c.optimizer.warmup_steps);
    ro.read("min_lr_ratio", c.optimizer.min_lr_ratio);
    ro.finish();
  }
  r.read("single_shot_ratio", c.single_shot_ratio);
  r.read("frame_substitution", c.frame_substitution);
  if (const auto* t = r.child("timestep")) {
    ObjectReader rt(*t, "timestep");
    rt.read("mu", c.timestep_mu);
    rt.read("sigma", c.timestep_sigma);
    rt.finish();
  }
  r.read("lct_steps", c.lct_steps);
  r.read("causal_steps", c.causal_steps);
  r.read("seed", c.seed);
  r.read("log_every", c.log_every);
  r.read("checkpoint_every", c.checkpoint_every);
  if (const auto* s = r.child("sampling")) {
    ObjectReader rs(*s, "sampling");
    rs.read("steps", c.sampling.steps);
    rs.read("history_tc", c.sampling.history_tc);
    rs.finish();
  }
  if (const auto* e = r.child("eval")) {
    ObjectReader re(*e, "eval");
    re.read("consistency_scenes", c.eval.consistency_scenes);
    re.read("consistency_shots", c.eval.consistency_shots);
    re.read("tc_trials", c.eval.tc_trials);
    re.read("curve_every", c.eval.curve_every);
    re.read("curve_scenes", c.eval.curve_scenes);
    re.read("seed", c.eval.seed);
    re.finish();
  }
  r.finish();
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  scene.validate();
  if (model.vocab_size < vocab::kSize) {
    throw ConfigError("model.vocab_size must be >= " + std::to_string(vocab::kSize) + " to hold the prompt vocabulary");
  }
  if (model.latent_channels != 4) throw ConfigError("model.latent_channels must be 4 (3 color + 1 mask)");
  if (scene.height % model.patch_h != 0 || scene.width % model.patch_w != 0 || scene.frames % model.patch_f != 0) {
    throw ConfigError("scene grid does not tile into the model's patch size");
  }
  if (frame_substitution > 0.0 && model.patch_f != 1) {
    throw ConfigError("frame_substitution requires model.patch_f == 1");
  }
  if (corpus_size < 1) throw ConfigError("corpus_size must be >= 1");
  if (max_context_shots < 1) throw ConfigError("max_context_shots must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
  };
  probability(single_shot_ratio, "single_shot_ratio");
  probability(frame_substitution, "frame_substitution");
  probability(sampling.history_tc, "sampling.history_tc");
  if (!(timestep_sigma > 0.0)) throw ConfigError("timestep.sigma must be > 0");
  if (lct_steps < 0 || causal_steps < 0) throw ConfigError("step counts must be >= 0");
  if (!(optimizer.lr >= 0.0)) throw ConfigError("optimizer.lr must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("optimizer betas must be in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  if (!(optimizer.clip_norm > 0.0)) throw ConfigError("optimizer.clip_norm must be > 0");
  if (optimizer.warmup_steps < 0) throw ConfigError("optimizer.warmup_steps must be >= 0");
  probability(optimizer.min_lr_ratio, "optimizer.min_lr_ratio");
  if (sampling.steps < 1) throw ConfigError("sampling.steps must be >= 1");
  if (log_every < 1 || checkpoint_every < 0) throw ConfigError("log_every must be >= 1 and checkpoint_every >= 0");
  if (eval.consistency_scenes < 1 || eval.consistency_shots < 2 || eval.tc_trials < 1 || eval.curve_every < 0 ||
      eval.curve_scenes < 1) {
    throw ConfigError("eval settings out of range");
  }
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return train_config_from_json(j);
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_hash(const TrainConfig& c) {
  const std::string text = to_json(c).dump();
  return fnv1a(text.data(), text.size());
}

}  // namespace lct

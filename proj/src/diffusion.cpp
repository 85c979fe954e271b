// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace lct {

void SceneBatch::validate(const ModelConfig& config) const {
  layout.validate();
  const auto n = layout.shots.size();
  if (z0.size() != n || eps.size() != n || prompt_ids.size() != n || t_shots.size() != n) {
    throw ShapeError("scene batch: per-shot lists must have " + std::to_string(n) + " entries");
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto expected = latent_for_shot(layout.shots[k], config);
    if (!z0[k].same_shape(expected) || !eps[k].same_shape(expected)) {
      throw ShapeError("scene batch: shot " + std::to_string(k) + " latent " + z0[k].shape_string() +
                       " does not match its grid " + expected.shape_string());
    }
    if (layout.shots[k].is_global_group && t_shots[k] != 0.0) {
      throw ShapeError("scene batch: the global group must have t = 0");
    }
  }
}

Latent global_dummy_latent(const ModelConfig& config) {
  return Latent(config.latent_channels, config.patch_h, config.patch_w, config.patch_f);
}

Latent gaussian_like(const Latent& shape, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  Latent out(shape.channels, shape.height, shape.width, shape.frames);
  for (Index i = 0; i < out.size(); ++i) out.data[i] = dist(rng);
  return out;
}

std::vector<double> sample_timesteps(int n_shots, double mu, double sigma, std::mt19937_64& rng) {
  if (!(sigma > 0.0)) throw ConfigError("sample_timesteps: sigma must be > 0");
  if (n_shots < 0) throw ConfigError("sample_timesteps: negative shot count");
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(n_shots));
  for (auto& v : t) {
    v = 1.0 / (1.0 + std::exp(-(mu + sigma * dist(rng))));
    // Keep the open interval even when the sigmoid saturates in double.
    v = std::clamp(v, 1e-7, 1.0 - 1e-7);
  }
  return t;
}

void draw_noise(SceneBatch& batch, double mu, double sigma, std::mt19937_64& rng) {
  const auto n = static_cast<int>(batch.layout.shots.size());
  batch.t_shots = sample_timesteps(n, mu, sigma, rng);
  batch.eps.clear();
  for (int k = 0; k < n; ++k) {
    if (batch.layout.shots[static_cast<std::size_t>(k)].is_global_group) {
      batch.t_shots[static_cast<std::size_t>(k)] = 0.0;
      batch.eps.push_back(batch.z0[static_cast<std::size_t>(k)]);
      batch.eps.back().data.setZero();
    } else {
      batch.eps.push_back(gaussian_like(batch.z0[static_cast<std::size_t>(k)], rng));
    }
  }
}

std::string to_string(SampleMode mode) {
  switch (mode) {
    case SampleMode::kJoint:
      return "joint";
    case SampleMode::kConditioned:
      return "cond";
    case SampleMode::kAutoRegressive:
      return "ar";
  }
  return "joint";
}

SampleMode parse_sample_mode(std::string_view text) {
  if (text == "joint") return SampleMode::kJoint;
  if (text == "cond" || text == "conditioned") return SampleMode::kConditioned;
  if (text == "ar" || text == "auto-regressive") return SampleMode::kAutoRegressive;
  throw ConfigError("unknown sample mode '" + std::string(text) + "'");
}

std::vector<Matrix<float>> ModelField::velocity(const SceneInput<float>& input) const {
  NoGradGuard no_grad;
  std::vector<Matrix<float>> out;
  for (const auto& v : forward(*weights_, input, mode_)) out.push_back(v.value());
  return out;
}

namespace {

void validate_request(const VelocityField& field, const SampleRequest& req) {
  const auto& config = field.config();
  req.layout.validate();
  if (req.steps < 1) throw ConfigError("sampling needs steps >= 1");
  if (!(req.history_tc >= 0.0 && req.history_tc <= 1.0)) throw DomainError("history_tc outside [0, 1]");
  const bool causal = field.mode() == AttentionMode::kContextCausal;
  if (req.mode == SampleMode::kAutoRegressive) {
    if (!causal) throw ConfigError("auto-regressive sampling requires a context-causal model");
    if (field.weights() == nullptr) throw ConfigError("auto-regressive sampling requires KV-cache capable weights");
  } else if (causal) {
    throw ConfigError(to_string(req.mode) + " sampling requires a bidirectional model");
  }
  if (req.prompt_ids.size() != req.layout.shots.size()) {
    throw ShapeError("sample request: one prompt per layout shot required");
  }
  for (std::size_t k = 0; k < req.layout.shots.size(); ++k) {
    if (static_cast<int>(req.prompt_ids[k].size()) != req.layout.shots[k].text_len) {
      throw ShapeError("sample request: prompt " + std::to_string(k) + " length does not match the layout");
    }
  }
  for (const auto& [k, cond] : req.conditions.shots) {
    if (k < 0 || k >= req.layout.shot_count()) {
      throw ShapeError("conditioning refers to shot " + std::to_string(k) + " outside the layout");
    }
    const auto& shot = req.layout.shots[static_cast<std::size_t>(k)];
    if (shot.is_global_group) throw ShapeError("the global group cannot be a conditioning shot");
    if (!cond.latent.same_shape(latent_for_shot(shot, config))) {
      throw ShapeError("conditioning latent for shot " + std::to_string(k) + " " + cond.latent.shape_string() +
                       " does not match the layout grid");
    }
    if (!(cond.t_c >= 0.0 && cond.t_c <= 1.0)) {
      throw DomainError("conditioning t_c = " + std::to_string(cond.t_c) + " outside [0, 1]");
    }
  }
}

Latent fixed_noise(const Latent& like, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gaussian_like(like, rng);
}

SampleResult sample_jointly(const VelocityField& field, const SampleRequest& req) {
  const auto& config = field.config();
  const auto& shots = req.layout.shots;
  std::mt19937_64 rng(req.seed);

  SceneInput<float> in;
  in.layout = req.layout;
  in.prompt_ids = req.prompt_ids;
  std::vector<int> velocity_slot(shots.size(), -1);
  std::vector<bool> generated(shots.size(), false);
  int slot = 0;
  for (std::size_t k = 0; k < shots.size(); ++k) {
    if (shots[k].is_global_group) {
      in.video_tokens.push_back(Matrix<float>::Zero(shots[k].video_tokens(), config.patch_dim()));
      in.t_shots.push_back(0.0);
      continue;
    }
    velocity_slot[k] = slot++;
    const auto like = latent_for_shot(shots[k], config);
    const auto it = req.conditions.shots.find(static_cast<int>(k));
    if (it != req.conditions.shots.end()) {
      const auto& cond = it->second;
      in.video_tokens.push_back(
          patchify<float>(interpolate(cond.latent, fixed_noise(cond.latent, cond.noise_seed), cond.t_c), config));
      in.t_shots.push_back(cond.t_c);
    } else {
      generated[k] = true;
      in.video_tokens.push_back(patchify<float>(gaussian_like(like, rng), config));
      in.t_shots.push_back(1.0);
    }
  }

  for (int s = req.steps; s >= 1; --s) {
    const double t_now = static_cast<double>(s) / req.steps;
    const double t_next = static_cast<double>(s - 1) / req.steps;
    for (std::size_t k = 0; k < shots.size(); ++k)
      if (generated[k]) in.t_shots[k] = t_now;
    const auto v = field.velocity(in);
    const auto dt = static_cast<float>(t_next - t_now);
    for (std::size_t k = 0; k < shots.size(); ++k)
      if (generated[k]) in.video_tokens[k] += dt * v[static_cast<std::size_t>(velocity_slot[k])];
  }

  SampleResult out;
  out.generated = generated;
  for (std::size_t k = 0; k < shots.size(); ++k) {
    if (shots[k].is_global_group) {
      out.shots.push_back(global_dummy_latent(config));
    } else if (generated[k]) {
      out.shots.push_back(unpatchify<float>(in.video_tokens[k], shots[k], config));
    } else {
      out.shots.push_back(req.conditions.shots.at(static_cast<int>(k)).latent);
    }
  }
  return out;
}

SampleResult sample_autoregressive(const VelocityField& field, const SampleRequest& req) {
  const auto& w = *field.weights();
  const auto& config = w.config;
  const auto& shots = req.layout.shots;
  std::mt19937_64 rng(req.seed);
  KVCache<float> cache(config);
  SampleResult out;

  for (std::size_t k = 0; k < shots.size(); ++k) {
    ShotInput<float> in;
    in.shot = shots[k];
    in.prompt_ids = req.prompt_ids[k];
    const bool last = k + 1 == shots.size();
    if (shots[k].is_global_group) {
      in.video_tokens = Matrix<float>::Zero(shots[k].video_tokens(), config.patch_dim());
      in.t = 0.0;
      cache.append(forward_with_cache(w, in, cache).kv);
      out.shots.push_back(global_dummy_latent(config));
      out.generated.push_back(false);
      continue;
    }
    const auto it = req.conditions.shots.find(static_cast<int>(k));
    if (it != req.conditions.shots.end()) {
      const auto& cond = it->second;
      in.video_tokens =
          patchify<float>(interpolate(cond.latent, fixed_noise(cond.latent, cond.noise_seed), cond.t_c), config);
      in.t = cond.t_c;
      if (!last) cache.append(forward_with_cache(w, in, cache).kv);
      out.shots.push_back(cond.latent);
      out.generated.push_back(false);
      continue;
    }

    in.video_tokens = patchify<float>(gaussian_like(latent_for_shot(shots[k], config), rng), config);
    for (int s = req.steps; s >= 1; --s) {
      const double t_now = static_cast<double>(s) / req.steps;
      const double t_next = static_cast<double>(s - 1) / req.steps;
      in.t = t_now;
      const auto step = forward_with_cache(w, in, cache);
      in.video_tokens += static_cast<float>(t_next - t_now) * step.velocity;
    }
    Latent result = unpatchify<float>(in.video_tokens, shots[k], config);
    if (!last) {
      ShotInput<float> history = in;
      history.video_tokens = patchify<float>(
          interpolate(result, fixed_noise(result, history_noise_seed(req.seed, static_cast<int>(k))), req.history_tc), config);
      history.t = req.history_tc;
      cache.append(forward_with_cache(w, history, cache).kv);
    }
    out.shots.push_back(std::move(result));
    out.generated.push_back(true);
  }
  return out;
}

}  // namespace

std::uint64_t history_noise_seed(std::uint64_t seed, int shot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(shot), 0x68697374u};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

SampleResult euler_sample(const VelocityField& field, const SampleRequest& request) {
  validate_request(field, request);
  if (request.mode == SampleMode::kAutoRegressive) return sample_autoregressive(field, request);
  return sample_jointly(field, request);
}

}  // namespace lct

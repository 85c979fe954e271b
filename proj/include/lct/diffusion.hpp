// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Rectified flow over scenes: noising, the per-shot velocity loss,
// logit-normal timestep sampling and Euler sampling in joint, conditioned and
// auto-regressive modes.

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lct/latent.hpp"
#include "lct/mmdit.hpp"
#include "lct/tensor.hpp"

namespace lct {

// One scene prepared for the loss. Every per-shot list has one entry per
// layout shot; the global group carries a single all-zero patch for both z0
// and eps and is pinned to t = 0.
struct SceneBatch {
  SceneLayout layout;
  std::vector<Latent> z0;
  std::vector<std::vector<int>> prompt_ids;
  std::vector<double> t_shots;
  std::vector<Latent> eps;

  void validate(const ModelConfig& config) const;
};

// The zero dummy latent standing in for the global group's video.
Latent global_dummy_latent(const ModelConfig& config);

Latent gaussian_like(const Latent& shape, std::mt19937_64& rng);

// t_i = sigmoid(mu + sigma * g_i), g_i ~ N(0, 1) drawn independently per shot.
std::vector<double> sample_timesteps(int n_shots, double mu, double sigma, std::mt19937_64& rng);

// Fills t_shots (global pinned to 0) and eps for a batch whose layout, z0 and
// prompts are already set.
void draw_noise(SceneBatch& batch, double mu, double sigma, std::mt19937_64& rng);

template <typename Scalar>
SceneInput<Scalar> noised_input(const SceneBatch& batch, const ModelConfig& config) {
  batch.validate(config);
  SceneInput<Scalar> in;
  in.layout = batch.layout;
  in.prompt_ids = batch.prompt_ids;
  in.t_shots = batch.t_shots;
  for (std::size_t k = 0; k < batch.layout.shots.size(); ++k) {
    in.video_tokens.push_back(patchify<Scalar>(interpolate(batch.z0[k], batch.eps[k], batch.t_shots[k]), config));
  }
  return in;
}

template <typename Scalar>
struct SceneLoss {
  Tensor<Scalar> loss;              // unweighted mean of the per-shot losses
  std::vector<double> per_shot;     // one per non-global shot, layout order
};

// Velocity regression averaged over non-global shots. `predict`
// maps a SceneInput<Scalar> to one velocity tensor per non-global shot, in
// patch-token space.
template <typename Scalar, typename Predictor>
SceneLoss<Scalar> scene_loss(Predictor&& predict, const SceneBatch& batch, const ModelConfig& config) {
  const auto input = noised_input<Scalar>(batch, config);
  const std::vector<Tensor<Scalar>> velocity = predict(input);
  SceneLoss<Scalar> out;
  std::vector<Tensor<Scalar>> losses;
  std::size_t v = 0;
  for (std::size_t k = 0; k < batch.layout.shots.size(); ++k) {
    if (batch.layout.shots[k].is_global_group) continue;
    if (v >= velocity.size()) throw ShapeError("scene_loss: predictor returned too few shots");
    Latent target = batch.eps[k];
    target.data -= batch.z0[k].data;
    auto diff = sub(velocity[v++], Tensor<Scalar>(patchify<Scalar>(target, config)));
    auto shot_loss = mean(mul(diff, diff));
    out.per_shot.push_back(static_cast<double>(shot_loss.item()));
    losses.push_back(shot_loss);
  }
  if (v != velocity.size()) throw ShapeError("scene_loss: predictor returned too many shots");
  if (losses.empty()) throw ShapeError("scene_loss: scene has no non-global shots");
  Tensor<Scalar> total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
  out.loss = scale(total, Scalar(1) / static_cast<Scalar>(losses.size()));
  return out;
}

template <typename Scalar>
SceneLoss<Scalar> scene_loss(const ModelWeights<Scalar>& w, const SceneBatch& batch, AttentionMode mode) {
  return scene_loss<Scalar>([&](const SceneInput<Scalar>& in) { return forward(w, in, mode); }, batch, w.config);
}

// ---------------------------------------------------------------------------
// Sampling

enum class SampleMode { kJoint, kConditioned, kAutoRegressive };

std::string to_string(SampleMode mode);
SampleMode parse_sample_mode(std::string_view text);

struct ConditionSource {
  Latent latent;
  double t_c = 0.3;
  std::uint64_t noise_seed = 0;
};

// Shot index (in the request layout) -> condition held fixed while sampling.
struct ConditioningSpec {
  std::map<int, ConditionSource> shots;
};

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual const ModelConfig& config() const = 0;
  virtual AttentionMode mode() const = 0;
  // Velocity per non-global shot in patch-token space.
  virtual std::vector<Matrix<float>> velocity(const SceneInput<float>& input) const = 0;
  // Weights for KV-cache decoding; null when the field cannot decode incrementally.
  virtual const ModelWeights<float>* weights() const { return nullptr; }
};

class ModelField final : public VelocityField {
 public:
  ModelField(const ModelWeights<float>& weights, AttentionMode mode) : weights_(&weights), mode_(mode) {}
  const ModelConfig& config() const override { return weights_->config; }
  AttentionMode mode() const override { return mode_; }
  std::vector<Matrix<float>> velocity(const SceneInput<float>& input) const override;
  const ModelWeights<float>* weights() const override { return weights_; }

 private:
  const ModelWeights<float>* weights_;
  AttentionMode mode_;
};

struct SampleRequest {
  SceneLayout layout;
  std::vector<std::vector<int>> prompt_ids;
  int steps = 50;
  SampleMode mode = SampleMode::kJoint;
  ConditioningSpec conditions;
  // Auto-regressive mode: noise level at which each freshly generated shot
  // enters the KV cache as history for later shots.
  double history_tc = 0.3;
  std::uint64_t seed = 0;
};

struct SampleResult {
  std::vector<Latent> shots;     // one per layout shot; conditioned shots echo their source
  std::vector<bool> generated;   // true for shots produced by the sampler
};

SampleResult euler_sample(const VelocityField& field, const SampleRequest& request);

// Seed of the fixed noise with which generated shot `shot` re-enters the KV
// cache during auto-regressive sampling.
std::uint64_t history_noise_seed(std::uint64_t seed, int shot);

}  // namespace lct

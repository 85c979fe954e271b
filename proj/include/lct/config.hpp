// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Training / generation configuration, read from a single JSON file. Every
// object level rejects keys it does not know.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "lct/mmdit.hpp"
#include "lct/scenegen.hpp"

namespace lct {

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int warmup_steps = 50;
  double min_lr_ratio = 0.1;  // cosine decay floor as a fraction of lr

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct SamplingConfig {
  int steps = 50;
  double history_tc = 0.3;

  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

struct EvalConfig {
  int consistency_scenes = 50;
  int consistency_shots = 3;
  int tc_trials = 30;
  int curve_every = 0;      // causal adaptation: consistency measured every N steps (0 = start and end only)
  int curve_scenes = 100;
  std::uint64_t seed = 4242;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct TrainConfig {
  ModelConfig model;
  SceneConfig scene;
  int corpus_size = 1000;
  int max_context_shots = 9;
  int batch_size = 2;
  OptimizerConfig optimizer;
  double single_shot_ratio = 0.3;
  double frame_substitution = 0.1;
  double timestep_mu = 0.0;
  double timestep_sigma = 1.0;
  int lct_steps = 2000;
  int causal_steps = 134;
  std::uint64_t seed = 0;
  int log_every = 10;
  int checkpoint_every = 500;
  SamplingConfig sampling;
  EvalConfig eval;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const SceneConfig& c);
nlohmann::json to_json(const TrainConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
SceneConfig scene_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

TrainConfig load_train_config(const std::filesystem::path& path);

// FNV-1a 64 over the canonical (sorted-key, compact) JSON form.
std::uint64_t config_hash(const TrainConfig& c);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace lct

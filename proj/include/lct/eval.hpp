// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Measurement suites on the synthetic world: cross-shot consistency (joint vs
// independent single-shot generation, and auto-regressive), conditioning-
// timestep fidelity, single-shot loss, and error accumulation over long
// auto-regressive runs.

#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "lct/config.hpp"
#include "lct/diffusion.hpp"
#include "lct/scenegen.hpp"

namespace lct {

// Scenes whose shots all feature one subject character, with shot cuts and
// varied shot types. Deterministic in (config, count, shots, seed).
std::vector<SceneSample> consistency_suite(const SceneConfig& config, int count, int shots, std::uint64_t seed);

// Per-channel population std of the subject's extracted color across the
// shots in which it was found, averaged over channels. NaN when the subject
// was found in fewer than two shots.
double cross_shot_color_std(const StructuredPrompt& prompt, const std::vector<Latent>& shots);

struct ConsistencyReport {
  std::vector<double> joint;        // per-scene std (NaN: subject found in < 2 shots)
  std::vector<double> independent;
  double joint_mean = 0.0;          // mean over scenes where both were measurable
  double independent_mean = 0.0;
  int measured = 0;
};

nlohmann::json to_json(const ConsistencyReport& r);

// Joint generation of each scene versus generating each shot alone from the
// same prompts (layout [global, shot]).
ConsistencyReport eval_consistency(const ModelWeights<float>& weights, const TrainConfig& config,
                                   const std::vector<SceneSample>& suite, int steps, std::uint64_t seed);

struct ArConsistency {
  double color_std = 0.0;  // mean over measurable scenes
  int measured = 0;
};

// Auto-regressive generation of each suite scene with a context-causal model.
ArConsistency eval_ar_consistency(const ModelWeights<float>& weights, const TrainConfig& config,
                                  const std::vector<SceneSample>& suite, int steps, double history_tc,
                                  std::uint64_t seed);

struct TcSweepReport {
  std::vector<double> tc;
  std::vector<std::vector<double>> errors;   // [tc][trial]; NaN where the subject was not found
  std::vector<int> missing;                  // per t_c
  int paired = 0;                            // trials with the subject found at every t_c
  std::vector<double> mean_error;            // per t_c, over the paired trials
  std::vector<double> penalized_mean_error;  // per t_c, over all trials with a missing subject scored 1.0
};

nlohmann::json to_json(const TcSweepReport& r);

// A rendered source shot conditions a new shot of the same character at each
// t_c; error is the mean absolute channel difference between the subject's
// extracted color in the generated shot and in the source. Noise and seeds
// are shared across t_c values within a trial.
TcSweepReport eval_tc_sweep(const ModelWeights<float>& weights, const TrainConfig& config,
                            const std::vector<double>& tcs, int trials, int steps, std::uint64_t seed);

// Mean velocity loss on held-out single-shot samples ([global, shot]) with
// fixed noise.
double eval_single_shot_loss(const ModelWeights<float>& weights, AttentionMode mode, const TrainConfig& config,
                             int samples, std::uint64_t seed);

struct AccumulationReport {
  double history_tc = 0.0;
  std::vector<double> residual;  // per auto-regressive shot, averaged over trials
  double slope = 0.0;            // least-squares slope of residual over shot index
};

nlohmann::json to_json(const AccumulationReport& r);

// Quality proxy per auto-regressive shot: the model's velocity residual on
// its own output re-noised to t = 0.5.
AccumulationReport eval_accumulation(const ModelWeights<float>& weights, const TrainConfig& config, int shots,
                                     double history_tc, int trials, int steps, std::uint64_t seed);

}  // namespace lct

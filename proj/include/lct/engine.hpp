// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Training: batch assembly (multi-shot scenes mixed with single-shot
// samples, frame substitution, per-shot logit-normal timesteps), the AdamW
// loop with checkpoints and JSONL logs, and causal adaptation of
// bidirectional weights.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lct/checkpoint.hpp"
#include "lct/config.hpp"
#include "lct/corpus.hpp"
#include "lct/diffusion.hpp"

namespace lct {

struct TrainLogRecord {
  std::string phase;  // "lct" or "causal"
  long step = 0;      // 1-based index of the completed step
  double loss = 0.0;
  std::vector<double> per_shot;
  double lr = 0.0;
  double grad_norm = 0.0;
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const TrainLogRecord& r);

// Throws ConfigError if the corpus cannot feed a model with this config.
void check_corpus(const TrainConfig& config, const Corpus& corpus);

// Converts a scene (or a subset of its shots) into a batch with a global
// group, before noise is drawn.
SceneBatch scene_to_batch(const SceneSample& scene, const std::vector<int>& shots, const TrainConfig& config);

// The batches of training step `step` (0-based). Depends only on (config,
// corpus, step, mode), which makes resumed runs reproduce the trajectory.
std::vector<SceneBatch> make_training_batch(const TrainConfig& config, const Corpus& corpus, long step,
                                            AttentionMode mode);

// Fresh bidirectional checkpoint at step 0 from config.seed.
Checkpoint initial_checkpoint(const TrainConfig& config);

class Trainer {
 public:
  // `total_steps` is the phase length used by the learning-rate schedule.
  Trainer(Checkpoint start, const Corpus& corpus, long total_steps);

  TrainLogRecord step();
  long steps_done() const { return state_.step; }
  long total_steps() const { return total_steps_; }
  const Checkpoint& state() const { return state_; }

 private:
  Checkpoint state_;
  const Corpus* corpus_;
  long total_steps_;
  std::vector<std::pair<std::string, Tensor<float>>> params_;
};

struct TrainOptions {
  std::filesystem::path out_dir;        // empty: no files written
  std::optional<long> stop_after;       // stop early after this many completed steps
  std::function<void(const TrainLogRecord&)> on_step;
};

// Runs (or resumes) the LCT phase to config.lct_steps. When out_dir is set,
// appends "train.jsonl" every log_every steps and writes "lct-NNNNNN.lct"
// every checkpoint_every steps plus "lct-final.lct".
Checkpoint train(const TrainConfig& config, const Corpus& corpus, const TrainOptions& options = {},
                 std::optional<Checkpoint> resume = std::nullopt);

struct CurvePoint {
  long step = 0;
  double consistency = 0.0;  // 1 - mean cross-shot color std (higher is better)
  double color_std = 0.0;
  int scenes = 0;
};

nlohmann::json to_json(const CurvePoint& p);

struct AdaptResult {
  Checkpoint checkpoint;
  std::vector<CurvePoint> curve;
};

// Loads bidirectional weights unchanged, switches to context-causal masking
// and trains for config.causal_steps with a fresh optimizer at the constant
// rate the LCT schedule ends at (causal_phase_lr). The consistency
// curve is measured with auto-regressive sampling at step 0, every
// eval.curve_every steps and at the end.
AdaptResult adapt_causal(const Checkpoint& bidirectional, const Corpus& corpus, const TrainOptions& options = {});

// Wraps a phase's checkpoint as the start of causal adaptation.
Checkpoint causal_start(const Checkpoint& bidirectional);

// Mean of the most recent `window` losses (or fewer at the start).
double smoothed(const std::vector<double>& losses, std::size_t end, std::size_t window);

}  // namespace lct

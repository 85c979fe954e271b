// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/engine.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "lct/eval.hpp"
#include "lct/seeding.hpp"

namespace lct {

nlohmann::json to_json(const TrainLogRecord& r) {
  return {{"phase", r.phase}, {"step", r.step}, {"loss", r.loss},
          {"per_shot", r.per_shot}, {"lr", r.lr}, {"grad_norm", r.grad_norm},
          {"wall_seconds", r.wall_seconds}};
}

nlohmann::json to_json(const CurvePoint& p) {
  return {{"step", p.step}, {"consistency", p.consistency}, {"color_std", p.color_std}, {"scenes", p.scenes}};
}

void check_corpus(const TrainConfig& config, const Corpus& corpus) {
  if (corpus.scenes.empty()) throw ConfigError("corpus is empty");
  const auto& a = config.scene;
  const auto& b = corpus.config;
  if (a.height != b.height || a.width != b.width || a.frames != b.frames || a.global_text_len != b.global_text_len ||
      a.shot_text_len != b.shot_text_len) {
    throw ConfigError("corpus geometry (grid " + std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                      std::to_string(b.frames) + ", text " + std::to_string(b.global_text_len) + "/" +
                      std::to_string(b.shot_text_len) + ") does not match the training config");
  }
  for (const auto& s : corpus.scenes) {
    for (const auto& z : s.shots) (void)shot_for_latent(z, config.model, a.shot_text_len);
  }
}

SceneBatch scene_to_batch(const SceneSample& scene, const std::vector<int>& shots, const TrainConfig& config) {
  const auto ids = encode_prompt(scene.prompt, config.scene);
  SceneBatch batch;
  batch.layout.shots.push_back(global_group(config.scene.global_text_len));
  batch.prompt_ids.push_back(ids[0]);
  batch.z0.push_back(global_dummy_latent(config.model));
  for (int k : shots) {
    if (k < 0 || k >= static_cast<int>(scene.shots.size())) throw ShapeError("scene_to_batch: shot index out of range");
    const auto& z = scene.shots[static_cast<std::size_t>(k)];
    auto s = shot_for_latent(z, config.model, config.scene.shot_text_len);
    s.shot_cut = scene.prompt.shots[static_cast<std::size_t>(k)].shot_cut;
    batch.layout.shots.push_back(s);
    batch.prompt_ids.push_back(ids[static_cast<std::size_t>(k) + 1]);
    batch.z0.push_back(z);
  }
  return batch;
}

std::vector<SceneBatch> make_training_batch(const TrainConfig& config, const Corpus& corpus, long step,
                                            AttentionMode mode) {
  std::mt19937_64 rng(derive_seed({config.seed, static_cast<std::uint64_t>(step),
                                   mode == AttentionMode::kBidirectional ? 1u : 2u, 0xBA7Cu}));
  std::uniform_int_distribution<std::size_t> pick(0, corpus.scenes.size() - 1);
  std::bernoulli_distribution single(config.single_shot_ratio);
  std::bernoulli_distribution substitute(config.frame_substitution);
  std::vector<SceneBatch> out;
  for (int b = 0; b < config.batch_size; ++b) {
    const auto& scene = corpus.scenes[pick(rng)];
    const int n = static_cast<int>(scene.shots.size());
    std::vector<int> shots;
    if (single(rng)) {
      shots.push_back(std::uniform_int_distribution<int>(0, n - 1)(rng));
    } else {
      const int len = std::min(n, config.max_context_shots);
      const int start = std::uniform_int_distribution<int>(0, n - len)(rng);
      for (int k = start; k < start + len; ++k) shots.push_back(k);
    }
    auto batch = scene_to_batch(scene, shots, config);
    for (std::size_t k = 1; k < batch.layout.shots.size(); ++k) {
      if (!substitute(rng)) continue;
      const int f = std::uniform_int_distribution<int>(0, batch.z0[k].frames - 1)(rng);
      batch.z0[k] = batch.z0[k].frame(f);
      batch.layout.shots[k].f_tokens = 1;
    }
    draw_noise(batch, config.timestep_mu, config.timestep_sigma, rng);
    out.push_back(std::move(batch));
  }
  return out;
}

Checkpoint initial_checkpoint(const TrainConfig& config) {
  config.validate();
  Checkpoint c;
  c.config = config;
  c.weights = init_model<float>(config.model, config.seed, InitScheme::kAdaLnZero);
  c.mode = AttentionMode::kBidirectional;
  return c;
}

Trainer::Trainer(Checkpoint start, const Corpus& corpus, long total_steps)
    : state_(std::move(start)), corpus_(&corpus), total_steps_(total_steps) {
  check_corpus(state_.config, corpus);
  // Own the weights: the caller's checkpoint must not change as we train.
  state_.weights = state_.weights.clone();
  params_ = state_.weights.parameters();
}

TrainLogRecord Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& config = state_.config;
  const auto batches = make_training_batch(config, *corpus_, state_.step, state_.mode);
  for (auto& [name, p] : params_) p.zero_grad();

  TrainLogRecord rec;
  rec.phase = state_.mode == AttentionMode::kBidirectional ? "lct" : "causal";
  std::optional<Tensor<float>> total;
  for (const auto& batch : batches) {
    auto l = scene_loss(state_.weights, batch, state_.mode);
    rec.per_shot.insert(rec.per_shot.end(), l.per_shot.begin(), l.per_shot.end());
    total = total ? add(*total, l.loss) : l.loss;
  }
  auto loss = scale(*total, 1.0f / static_cast<float>(batches.size()));
  rec.loss = static_cast<double>(loss.item());
  if (!std::isfinite(rec.loss)) throw NumericError("training loss is not finite at step " + std::to_string(state_.step));
  loss.backward();

  std::vector<Matrix<float>> grads;
  grads.reserve(params_.size());
  for (const auto& [name, p] : params_) grads.push_back(p.grad());
  rec.grad_norm = clip_grad_norm(grads, config.optimizer.clip_norm);
  rec.lr = state_.mode == AttentionMode::kBidirectional ? scheduled_lr(config.optimizer, state_.step, total_steps_)
                                                        : causal_phase_lr(config.optimizer);
  adamw_step(params_, grads, state_.optimizer, config.optimizer, rec.lr);
  for (auto& [name, p] : params_) p.zero_grad();

  ++state_.step;
  rec.step = state_.step;
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

double smoothed(const std::vector<double>& losses, std::size_t end, std::size_t window) {
  end = std::min(end, losses.size());
  const std::size_t begin = end > window ? end - window : 0;
  if (end == begin) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += losses[i];
  return s / static_cast<double>(end - begin);
}

namespace {

std::string numbered(const char* prefix, long step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%06ld.lct", prefix, step);
  return buf;
}

void append_line(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << j.dump() << "\n";
}

// Shared phase loop for both training phases.
Checkpoint run_phase(Trainer& trainer, const TrainOptions& options, const char* prefix,
                     const std::function<void(long)>& after_step = {}) {
  const auto& config = trainer.state().config;
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  const auto start_wall = std::chrono::steady_clock::now();
  while (trainer.steps_done() < trainer.total_steps()) {
    if (options.stop_after && trainer.steps_done() >= *options.stop_after) break;
    auto rec = trainer.step();
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_wall).count();
    if (options.on_step) options.on_step(rec);
    const bool last = trainer.steps_done() == trainer.total_steps();
    if (!options.out_dir.empty()) {
      if (rec.step % config.log_every == 0 || last) append_line(options.out_dir / "train.jsonl", to_json(rec));
      if (config.checkpoint_every > 0 && rec.step % config.checkpoint_every == 0) {
        save_checkpoint(options.out_dir / numbered(prefix, rec.step), trainer.state());
      }
    }
    if (after_step) after_step(rec.step);
  }
  Checkpoint out = trainer.state();
  out.weights = out.weights.clone();
  if (!options.out_dir.empty() && trainer.steps_done() == trainer.total_steps()) {
    save_checkpoint(options.out_dir / (std::string(prefix) + "-final.lct"), out);
  }
  return out;
}

}  // namespace

Checkpoint train(const TrainConfig& config, const Corpus& corpus, const TrainOptions& options,
                 std::optional<Checkpoint> resume) {
  config.validate();
  Checkpoint start;
  if (resume) {
    if (resume->mode != AttentionMode::kBidirectional) {
      throw ConfigError("cannot resume LCT training from a context-causal checkpoint");
    }
    if (resume->config_hash() != config_hash(config)) {
      throw ConfigError("resume checkpoint was written with a different config");
    }
    start = std::move(*resume);
  } else {
    start = initial_checkpoint(config);
  }
  Trainer trainer(std::move(start), corpus, config.lct_steps);
  return run_phase(trainer, options, "lct");
}

Checkpoint causal_start(const Checkpoint& bidirectional) {
  if (bidirectional.mode != AttentionMode::kBidirectional) {
    throw ConfigError("causal adaptation expects a bidirectional checkpoint");
  }
  Checkpoint c;
  c.config = bidirectional.config;
  c.weights = bidirectional.weights.clone();
  c.mode = AttentionMode::kContextCausal;
  c.step = 0;
  return c;
}

AdaptResult adapt_causal(const Checkpoint& bidirectional, const Corpus& corpus, const TrainOptions& options) {
  Checkpoint start = causal_start(bidirectional);
  const auto& config = start.config;
  const auto suite =
      consistency_suite(config.scene, config.eval.curve_scenes, config.eval.consistency_shots, config.eval.seed);
  AdaptResult result;
  auto measure = [&](long step, const ModelWeights<float>& w) {
    const auto ar = eval_ar_consistency(w, config, suite, config.sampling.steps, config.sampling.history_tc,
                                        derive_seed({config.eval.seed, 0xCA5Au}));
    CurvePoint p{step, 1.0 - ar.color_std, ar.color_std, ar.measured};
    result.curve.push_back(p);
    if (!options.out_dir.empty()) {
      std::filesystem::create_directories(options.out_dir);
      append_line(options.out_dir / "curve.jsonl", to_json(p));
    }
  };
  measure(0, start.weights);
  Trainer trainer(std::move(start), corpus, config.causal_steps);
  const long every = config.eval.curve_every;
  result.checkpoint = run_phase(trainer, options, "causal", [&](long step) {
    if (every > 0 && step % every == 0 && step != trainer.total_steps()) measure(step, trainer.state().weights);
  });
  if (result.curve.back().step != result.checkpoint.step) measure(result.checkpoint.step, result.checkpoint.weights);
  return result;
}

}  // namespace lct

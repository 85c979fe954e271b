// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/director.hpp"

#include <algorithm>
#include <set>

#include "lct/prompt_json.hpp"
#include "lct/seeding.hpp"

namespace lct {

const PoolEntry& HistoryPool::add(PoolEntry entry) {
  entry.id = next_id_++;
  entries_.push_back(std::move(entry));
  return entries_.back();
}

const PoolEntry& HistoryPool::restore(PoolEntry entry) {
  if (entry.id < next_id_) {
    throw SessionError("pool entry id " + std::to_string(entry.id) + " restored out of order");
  }
  next_id_ = entry.id + 1;
  entries_.push_back(std::move(entry));
  return entries_.back();
}

bool HistoryPool::contains(int id) const {
  return std::any_of(entries_.begin(), entries_.end(), [id](const PoolEntry& e) { return e.id == id; });
}

const PoolEntry& HistoryPool::get(int id) const {
  for (const auto& e : entries_)
    if (e.id == id) return e;
  throw SessionError("unknown pool entry " + std::to_string(id));
}

nlohmann::json to_json(const Grid& g) { return {{"height", g.height}, {"width", g.width}, {"frames", g.frames}}; }

std::uint64_t condition_noise_seed(std::uint64_t seed, int entry_id) {
  return derive_seed({seed, static_cast<std::uint64_t>(entry_id), 0x636F6E64u});
}

Director::Director(std::shared_ptr<const Checkpoint> checkpoint, SampleMode mode)
    : checkpoint_(std::move(checkpoint)), mode_(mode) {
  if (!checkpoint_) throw ConfigError("director needs a checkpoint");
  const bool causal = checkpoint_->mode == AttentionMode::kContextCausal;
  if ((mode_ == SampleMode::kAutoRegressive) != causal) {
    throw ConfigError("sampling mode '" + to_string(mode_) + "' does not match a " +
                      (causal ? "context-causal" : "bidirectional") + " checkpoint");
  }
}

namespace {

ShotDescriptor grid_descriptor(const Grid& g, const ModelConfig& model, int text_len) {
  if (g.height < 1 || g.width < 1 || g.frames < 1) throw ShapeError("grid dimensions must be positive");
  return shot_for_latent(Latent(model.latent_channels, g.height, g.width, g.frames), model, text_len);
}

}  // namespace

void Director::validate(const ShotRequest& request) const {
  (void)build_request(request);
}

SampleRequest Director::build_request(const ShotRequest& request) const {
  const auto& config = checkpoint_->config;
  (void)encode_global(request.global, config.scene.global_text_len);
  (void)encode_shot(request.shot, config.scene.shot_text_len);
  check_subject(request.global, request.shot);
  std::set<int> seen;
  for (const auto& c : request.conditions) {
    if (!seen.insert(c.entry_id).second) {
      throw SessionError("pool entry " + std::to_string(c.entry_id) + " selected twice");
    }
    (void)pool_.get(c.entry_id);
    if (!(c.t_c >= 0.0 && c.t_c <= 1.0)) {
      throw DomainError("t_c = " + std::to_string(c.t_c) + " for entry " + std::to_string(c.entry_id) +
                        " outside [0, 1]");
    }
  }
  const Grid grid = request.grid.value_or(Grid{config.scene.height, config.scene.width, config.scene.frames});
  auto shot = grid_descriptor(grid, config.model, config.scene.shot_text_len);
  shot.shot_cut = request.shot.shot_cut;

  SampleRequest req;
  req.steps = request.steps.value_or(config.sampling.steps);
  if (req.steps < 1) throw DomainError("sampling steps must be >= 1");
  req.seed = request.seed;
  req.history_tc = config.sampling.history_tc;
  req.layout.shots.push_back(global_group(config.scene.global_text_len));
  req.prompt_ids.push_back(encode_global(request.global, config.scene.global_text_len));
  for (const auto& c : request.conditions) {
    const auto& e = pool_.get(c.entry_id);
    const int k = static_cast<int>(req.layout.shots.size());
    req.layout.shots.push_back(e.layout);
    req.prompt_ids.push_back(encode_shot(e.shot, config.scene.shot_text_len));
    req.conditions.shots[k] = ConditionSource{e.latent, c.t_c, condition_noise_seed(request.seed, e.id)};
  }
  req.layout.shots.push_back(shot);
  req.prompt_ids.push_back(encode_shot(request.shot, config.scene.shot_text_len));
  if (mode_ == SampleMode::kAutoRegressive) {
    req.mode = SampleMode::kAutoRegressive;
  } else {
    req.mode = request.conditions.empty() ? SampleMode::kJoint : SampleMode::kConditioned;
  }
  return req;
}

Latent Director::sample(const SampleRequest& request) const {
  const ModelField field(checkpoint_->weights, checkpoint_->mode);
  auto result = euler_sample(field, request);
  return std::move(result.shots.back());
}

const PoolEntry& Director::commit(const ShotRequest& request, Latent latent, nlohmann::json extra) {
  const auto& config = checkpoint_->config;
  PoolEntry e;
  e.layout = shot_for_latent(latent, config.model, config.scene.shot_text_len);
  e.layout.shot_cut = request.shot.shot_cut;
  e.latent = std::move(latent);
  e.global = request.global;
  e.shot = request.shot;
  nlohmann::json conditions = nlohmann::json::array();
  for (const auto& c : request.conditions) conditions.push_back({{"entry_id", c.entry_id}, {"t_c", c.t_c}});
  e.metadata = {{"seed", request.seed},
                {"steps", request.steps.value_or(config.sampling.steps)},
                {"mode", to_string(mode_)},
                {"conditions", conditions},
                {"grid", to_json(Grid{e.latent.height, e.latent.width, e.latent.frames})}};
  e.metadata.update(extra);
  return pool_.add(std::move(e));
}

const PoolEntry& Director::generate_shot(const ShotRequest& request) {
  return commit(request, sample(build_request(request)));
}

std::vector<int> Director::generate_scene(const StructuredPrompt& prompt, std::uint64_t seed, std::optional<int> steps) {
  const auto& config = checkpoint_->config;
  if (prompt.shots.empty()) throw VocabularyError("scene prompt has no shots");
  for (const auto& s : prompt.shots) check_subject(prompt.global, s);
  std::vector<Latent> shapes;
  for (std::size_t k = 0; k < prompt.shots.size(); ++k) {
    shapes.emplace_back(config.model.latent_channels, config.scene.height, config.scene.width, config.scene.frames);
  }
  SampleRequest req;
  req.layout = scene_layout(config.scene, config.model, prompt, shapes);
  req.prompt_ids = encode_prompt(prompt, config.scene);
  req.steps = steps.value_or(config.sampling.steps);
  req.mode = mode_ == SampleMode::kAutoRegressive ? SampleMode::kAutoRegressive : SampleMode::kJoint;
  req.seed = seed;
  req.history_tc = config.sampling.history_tc;
  const ModelField field(checkpoint_->weights, checkpoint_->mode);
  auto result = euler_sample(field, req);

  std::vector<int> ids;
  for (std::size_t k = 0; k < prompt.shots.size(); ++k) {
    ShotRequest r;
    r.global = prompt.global;
    r.shot = prompt.shots[k];
    r.seed = seed;
    r.steps = req.steps;
    ids.push_back(commit(r, std::move(result.shots[k + 1]), {{"scene_shot", k}}).id);
  }
  return ids;
}

ShotRequest Director::extension_request(int entry_id, ShotPrompt bridging, ExtendMode mode, std::uint64_t seed,
                                        double t_c) const {
  const auto& source = pool_.get(entry_id);
  bridging.shot_cut = mode == ExtendMode::kWithCut;
  ShotRequest r;
  r.global = source.global;
  r.shot = bridging;
  r.conditions = {{entry_id, t_c}};
  r.grid = Grid{source.latent.height, source.latent.width, source.latent.frames};
  r.seed = seed;
  return r;
}

const PoolEntry& Director::extend_shot(int entry_id, ShotPrompt bridging, ExtendMode mode, std::uint64_t seed,
                                       double t_c) {
  const auto r = extension_request(entry_id, std::move(bridging), mode, seed, t_c);
  return commit(r, sample(build_request(r)),
                {{"extends", entry_id}, {"extend_mode", mode == ExtendMode::kWithCut ? "with_cut" : "without_cut"}});
}

}  // namespace lct

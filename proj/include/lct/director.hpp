// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Interactive generation over a history pool: each new shot is sampled with
// a layout of [global group, selected pool entries..., new shot], where the
// selected entries are chosen explicitly by id and enter at their own t_c.
// Generated shots are appended to the pool.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "json.hpp"

#include "lct/checkpoint.hpp"
#include "lct/diffusion.hpp"
#include "lct/scenegen.hpp"

namespace lct {

struct PoolEntry {
  int id = 0;
  Latent latent;
  GlobalPrompt global;
  ShotPrompt shot;
  ShotDescriptor layout;       // token grid of the shot
  nlohmann::json metadata;     // seed, steps, sampling mode, conditions, ...
};

// Entry ids start at 1 and are never reused.
class HistoryPool {
 public:
  const PoolEntry& add(PoolEntry entry);  // assigns the id
  // Re-inserts an entry with its original id (journal replay). Throws
  // SessionError if the id is not larger than every existing id.
  const PoolEntry& restore(PoolEntry entry);

  bool contains(int id) const;
  const PoolEntry& get(int id) const;  // SessionError if unknown
  const std::vector<PoolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  int next_id() const { return next_id_; }

 private:
  std::vector<PoolEntry> entries_;
  int next_id_ = 1;
};

struct ConditionRef {
  int entry_id = 0;
  double t_c = 0.3;
};

// Latent dimensions of a shot; must tile under the model's patch size.
struct Grid {
  int height = 8;
  int width = 8;
  int frames = 4;
  friend bool operator==(const Grid&, const Grid&) = default;
};

nlohmann::json to_json(const Grid& g);

struct ShotRequest {
  GlobalPrompt global;
  ShotPrompt shot;                      // shot.shot_cut selects the leading token
  std::vector<ConditionRef> conditions;  // in layout order
  std::optional<Grid> grid;             // default: the training scene grid
  std::uint64_t seed = 0;
  std::optional<int> steps;             // default: sampling.steps of the checkpoint config
};

enum class ExtendMode { kWithCut, kWithoutCut };

class Director {
 public:
  // Throws ConfigError if `mode` is incompatible with the checkpoint: auto-
  // regressive sampling needs a context-causal checkpoint, joint and
  // conditioned sampling a bidirectional one.
  Director(std::shared_ptr<const Checkpoint> checkpoint, SampleMode mode);

  SampleMode mode() const { return mode_; }
  const Checkpoint& checkpoint() const { return *checkpoint_; }
  const HistoryPool& pool() const { return pool_; }
  HistoryPool& pool() { return pool_; }

  // Checks entry ids (SessionError), t_c ranges (DomainError), the prompt
  // (VocabularyError) and the grid (ShapeError) without sampling.
  void validate(const ShotRequest& request) const;

  // The sampler request a shot request expands to; the new shot is last.
  SampleRequest build_request(const ShotRequest& request) const;

  // Sampling only; the pool is not modified.
  Latent sample(const SampleRequest& request) const;

  // Appends a sampled shot to the pool.
  const PoolEntry& commit(const ShotRequest& request, Latent latent, nlohmann::json extra = nlohmann::json::object());

  const PoolEntry& generate_shot(const ShotRequest& request);

  // All shots of a prompt in one joint (bidirectional) or auto-regressive
  // (causal) pass, appended in order. Returns the new entry ids.
  std::vector<int> generate_scene(const StructuredPrompt& prompt, std::uint64_t seed,
                                  std::optional<int> steps = std::nullopt);

  // Continues an entry: the source is conditioned at `t_c` and the bridging
  // prompt's leading token is [SHOT CUT] only for kWithCut.
  const PoolEntry& extend_shot(int entry_id, ShotPrompt bridging, ExtendMode mode, std::uint64_t seed,
                               double t_c = 0.1);

  ShotRequest extension_request(int entry_id, ShotPrompt bridging, ExtendMode mode, std::uint64_t seed,
                                double t_c = 0.1) const;

 private:
  std::shared_ptr<const Checkpoint> checkpoint_;
  SampleMode mode_;
  HistoryPool pool_;
};

// Seed of the fixed noise with which pool entry `entry_id` is conditioned.
std::uint64_t condition_noise_seed(std::uint64_t seed, int entry_id);

}  // namespace lct

// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/mmdit.hpp"

#include <algorithm>

namespace lct {

std::string to_string(AttentionMode mode) {
  return mode == AttentionMode::kBidirectional ? "bidirectional" : "context-causal";
}

AttentionMode parse_attention_mode(std::string_view text) {
  if (text == "bidirectional") return AttentionMode::kBidirectional;
  if (text == "context-causal" || text == "causal") return AttentionMode::kContextCausal;
  throw ConfigError("unknown attention mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model.") + name + " must be >= 1");
  };
  positive(d_model, "d_model");
  positive(heads, "heads");
  positive(blocks, "blocks");
  positive(latent_channels, "latent_channels");
  positive(patch_h, "patch_h");
  positive(patch_w, "patch_w");
  positive(patch_f, "patch_f");
  positive(vocab_size, "vocab_size");
  positive(mlp_ratio, "mlp_ratio");
  if (d_model % heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  }
  if (freq_dim < 2 || freq_dim % 2 != 0) throw ConfigError("model.freq_dim must be even and >= 2");
  if (!(rope_base > 1.0)) throw ConfigError("model.rope_base must be > 1");
  RopeSplit split(head_dim());
  (void)split;
}

bool AttentionMask::all_allowed() const {
  return std::all_of(allowed.begin(), allowed.end(), [](std::uint8_t a) { return a != 0; });
}

std::vector<int> token_shot_index(const SceneLayout& layout) {
  std::vector<int> index;
  index.reserve(static_cast<std::size_t>(layout.token_count()));
  for (std::size_t k = 0; k < layout.shots.size(); ++k) {
    index.insert(index.end(), static_cast<std::size_t>(layout.shots[k].token_count()), static_cast<int>(k));
  }
  return index;
}

AttentionMask build_mask(const SceneLayout& layout, AttentionMode mode) {
  layout.validate();
  const auto shot = token_shot_index(layout);
  AttentionMask mask;
  mask.mode = mode;
  mask.size = static_cast<Index>(shot.size());
  mask.allowed.assign(shot.size() * shot.size(), 1);
  if (mode == AttentionMode::kContextCausal) {
    for (std::size_t i = 0; i < shot.size(); ++i) {
      for (std::size_t j = 0; j < shot.size(); ++j) {
        mask.allowed[i * shot.size() + j] = shot[j] <= shot[i] ? 1 : 0;
      }
    }
  }
  return mask;
}

}  // namespace lct

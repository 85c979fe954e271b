// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Prompt documents for offline sampling and writing sampled scenes to disk.
//
// A prompt document is a structured prompt plus optional conditions:
//
//   {"global": {...}, "shots": [{...}, ...],
//    "conditions": [{"shot": 0, "t_c": 0.3, "motion": [2, 3]}],
//    "texture_seed": 0}
//
// A conditioned shot is rendered from the world the global prompt describes
// (exact palette colors) and held fixed at its t_c while the others are
// sampled.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>

#include "json.hpp"

#include "lct/checkpoint.hpp"
#include "lct/diffusion.hpp"
#include "lct/scenegen.hpp"

namespace lct {

struct PromptCondition {
  double t_c = 0.3;
  ShotMotion motion{2, 2};
};

struct PromptDocument {
  StructuredPrompt prompt;
  std::map<int, PromptCondition> conditions;  // by shot index
  std::uint64_t texture_seed = 0;
};

// Throws VocabularyError for malformed prompts or conditions.
PromptDocument parse_prompt_document(const nlohmann::json& j);

// Builds the sampler request. Throws ConfigError when the conditions do not
// suit the mode (joint: none allowed; cond: at least one required).
SampleRequest prompt_request(const TrainConfig& config, const PromptDocument& doc, SampleMode mode,
                             std::uint64_t seed, std::optional<int> steps);

// Samples and writes shot-K.lat, shot-K-frame-F.bmp and sample.json to
// `dir`. Returns the sample.json content.
nlohmann::json sample_to_directory(const Checkpoint& ckpt, const PromptDocument& doc, SampleMode mode,
                                   std::uint64_t seed, std::optional<int> steps, const std::filesystem::path& dir);

}  // namespace lct

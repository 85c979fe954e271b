// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// JSON form of structured prompts, shared by the CLI prompt files and the
// service. Parsers throw VocabularyError for anything malformed.
//
//   global: {"story": 0, "environment": 2,
//            "characters": [{"id": 0, "color": 5, "size": 1}]}
//   shot:   {"type": "close", "subject": 0 | null, "action": "left", "shot_cut": true}

#pragma once

#include <cstdint>

#include "json.hpp"

#include "lct/scenegen.hpp"

namespace lct {

nlohmann::json to_json(const GlobalPrompt& g);
nlohmann::json to_json(const ShotPrompt& s);
nlohmann::json to_json(const StructuredPrompt& p);

GlobalPrompt global_prompt_from_json(const nlohmann::json& j);
// "shot_cut" is optional (default false).
ShotPrompt shot_prompt_from_json(const nlohmann::json& j);
// {"global": {...}, "shots": [{...}, ...]}
StructuredPrompt structured_prompt_from_json(const nlohmann::json& j);

// Throws VocabularyError if the shot's subject is not a global character.
void check_subject(const GlobalPrompt& g, const ShotPrompt& s);

// A world matching a global prompt, with exact palette colors (no jitter).
World world_from_prompt(const GlobalPrompt& g, std::uint64_t texture_seed = 0);

}  // namespace lct

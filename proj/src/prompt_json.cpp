// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/prompt_json.hpp"

#include <set>
#include <string>

namespace lct {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key, const char* where) {
  if (!j.is_object()) throw VocabularyError(std::string(where) + " must be a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw VocabularyError(std::string(where) + " is missing \"" + key + "\"");
  return *it;
}

int int_in(const json& v, int count, const std::string& what) {
  if (!v.is_number_integer()) throw VocabularyError(what + " must be an integer");
  const auto x = v.get<long long>();
  if (x < 0 || x >= count) {
    throw VocabularyError(what + " = " + std::to_string(x) + " outside [0, " + std::to_string(count - 1) + "]");
  }
  return static_cast<int>(x);
}

std::string text(const json& v, const std::string& what) {
  if (!v.is_string()) throw VocabularyError(what + " must be a string");
  return v.get<std::string>();
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw VocabularyError(std::string(where) + " has unknown key \"" + k + "\"");
  }
}

}  // namespace

void check_subject(const GlobalPrompt& g, const ShotPrompt& s) {
  if (!s.subject) return;
  for (const auto& c : g.characters)
    if (c.id == *s.subject) return;
  throw VocabularyError("shot subject Character " + std::to_string(*s.subject) + " is not in the global prompt");
}

json to_json(const GlobalPrompt& g) {
  json characters = json::array();
  for (const auto& c : g.characters) characters.push_back({{"id", c.id}, {"color", c.color}, {"size", c.size}});
  return {{"story", g.story}, {"environment", g.environment}, {"characters", characters}};
}

json to_json(const ShotPrompt& s) {
  return {{"type", to_string(s.type)},
          {"subject", s.subject ? json(*s.subject) : json(nullptr)},
          {"action", to_string(s.action)},
          {"shot_cut", s.shot_cut}};
}

json to_json(const StructuredPrompt& p) {
  json shots = json::array();
  for (const auto& s : p.shots) shots.push_back(to_json(s));
  return {{"global", to_json(p.global)}, {"shots", shots}};
}

GlobalPrompt global_prompt_from_json(const json& j) {
  GlobalPrompt g;
  g.story = int_in(field(j, "story", "global prompt"), vocab::kStoryCount, "story");
  g.environment = int_in(field(j, "environment", "global prompt"), vocab::kEnvironmentCount, "environment");
  const auto& chars = field(j, "characters", "global prompt");
  if (!chars.is_array()) throw VocabularyError("global prompt \"characters\" must be an array");
  if (chars.size() > static_cast<std::size_t>(vocab::kMaxCharacters)) throw VocabularyError("too many characters");
  only_keys(j, {"story", "environment", "characters"}, "global prompt");
  std::set<int> seen;
  for (const auto& c : chars) {
    GlobalPrompt::Entry e;
    e.id = int_in(field(c, "id", "character"), vocab::kMaxCharacters, "character id");
    e.color = int_in(field(c, "color", "character"), vocab::kColorCount, "color");
    e.size = int_in(field(c, "size", "character"), vocab::kSizeCount, "size");
    only_keys(c, {"id", "color", "size"}, "character");
    if (!seen.insert(e.id).second) throw VocabularyError("character id " + std::to_string(e.id) + " listed twice");
    g.characters.push_back(e);
  }
  return g;
}

ShotPrompt shot_prompt_from_json(const json& j) {
  ShotPrompt s;
  s.type = parse_shot_type(text(field(j, "type", "shot prompt"), "shot type"));
  s.action = parse_action(text(field(j, "action", "shot prompt"), "action"));
  if (const auto it = j.find("subject"); it != j.end() && !it->is_null()) {
    s.subject = int_in(*it, vocab::kMaxCharacters, "subject");
  }
  if (const auto it = j.find("shot_cut"); it != j.end()) {
    if (!it->is_boolean()) throw VocabularyError("shot_cut must be a boolean");
    s.shot_cut = it->get<bool>();
  }
  only_keys(j, {"type", "subject", "action", "shot_cut"}, "shot prompt");
  return s;
}

StructuredPrompt structured_prompt_from_json(const json& j) {
  StructuredPrompt p;
  p.global = global_prompt_from_json(field(j, "global", "prompt"));
  const auto& shots = field(j, "shots", "prompt");
  if (!shots.is_array()) throw VocabularyError("prompt \"shots\" must be an array");
  for (const auto& s : shots) {
    p.shots.push_back(shot_prompt_from_json(s));
    check_subject(p.global, p.shots.back());
  }
  return p;
}

World world_from_prompt(const GlobalPrompt& g, std::uint64_t texture_seed) {
  World w;
  w.story = g.story;
  w.environment.palette = g.environment;
  w.environment.background = environment_palette()[static_cast<std::size_t>(g.environment)];
  w.environment.texture_seed = texture_seed;
  for (const auto& e : g.characters) {
    Character c;
    c.id = e.id;
    c.palette = e.color;
    c.color = character_palette()[static_cast<std::size_t>(e.color)];
    c.size = e.size;
    w.characters.push_back(c);
  }
  return w;
}

}  // namespace lct

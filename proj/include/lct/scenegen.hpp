// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural multi-shot scenes rendered directly in a 4-channel latent space
// (three color channels plus a mask channel), together with the two-tier
// global / per-shot prompt schema over a closed toy vocabulary.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lct/latent.hpp"
#include "lct/mmdit.hpp"
#include "lct/rope.hpp"

namespace lct {

using Color = Eigen::Vector3f;

namespace vocab {

inline constexpr int kPad = 0;
inline constexpr int kSep = 1;
inline constexpr int kShotCut = 2;
inline constexpr int kGlobal = 3;
inline constexpr int kCharacterBase = 4;  // "Character 0" .. "Character 2"
inline constexpr int kMaxCharacters = 3;
inline constexpr int kColorBase = 7;
inline constexpr int kColorCount = 8;
inline constexpr int kSizeBase = 15;
inline constexpr int kSizeCount = 3;
inline constexpr int kEnvironmentBase = 18;
inline constexpr int kEnvironmentCount = 6;
inline constexpr int kStoryBase = 24;
inline constexpr int kStoryCount = 8;
inline constexpr int kShotTypeBase = 32;
inline constexpr int kActionBase = 35;
inline constexpr int kActionCount = 5;
inline constexpr int kNoSubject = 40;
inline constexpr int kSize = 41;

std::string symbol(int token);

}  // namespace vocab

enum class ShotType { kWide = 0, kMid = 1, kClose = 2 };
enum class Action { kIdle = 0, kLeft = 1, kRight = 2, kUp = 3, kDown = 4 };

std::string to_string(ShotType type);
std::string to_string(Action action);
ShotType parse_shot_type(std::string_view text);
Action parse_action(std::string_view text);

// Reference colors of the character palette (corners of a cube) and the
// environment palette. Rendered colors are these plus a per-scene jitter.
const std::array<Color, vocab::kColorCount>& character_palette();
const std::array<Color, vocab::kEnvironmentCount>& environment_palette();

struct Character {
  int id = 0;
  int palette = 0;
  Color color = Color::Zero();
  int size = 0;
};

struct Environment {
  int palette = 0;
  Color background = Color::Zero();
  std::uint64_t texture_seed = 0;
};

struct World {
  std::vector<Character> characters;
  Environment environment;
  int story = 0;

  const Character* find(int id) const;
};

struct GlobalPrompt {
  struct Entry {
    int id = 0;
    int color = 0;
    int size = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> characters;
  int environment = 0;
  int story = 0;
  friend bool operator==(const GlobalPrompt&, const GlobalPrompt&) = default;
};

struct ShotPrompt {
  ShotType type = ShotType::kWide;
  std::optional<int> subject;  // character id; empty for an establishing shot
  Action action = Action::kIdle;
  bool shot_cut = false;
  friend bool operator==(const ShotPrompt&, const ShotPrompt&) = default;
};

struct StructuredPrompt {
  GlobalPrompt global;
  std::vector<ShotPrompt> shots;
  friend bool operator==(const StructuredPrompt&, const StructuredPrompt&) = default;
};

struct SceneConfig {
  int min_shots = 2;
  int max_shots = 5;
  int height = 8;
  int width = 8;
  int frames = 4;
  int max_characters = 3;
  int global_text_len = 16;
  int shot_text_len = 8;
  double continuous_fraction = 2.0 / 3.0;
  double establishing_probability = 0.15;
  float color_jitter = 0.1f;
  float render_noise = 0.01f;

  void validate() const;
};

// Block start position for one shot; motion is one cell per frame along the
// action direction with wraparound.
struct ShotMotion {
  int x0 = 0;
  int y0 = 0;
};

struct SceneSample {
  World world;
  StructuredPrompt prompt;
  std::vector<ShotMotion> motions;
  std::vector<Latent> shots;  // one per prompt shot (no global dummy)
  bool continuous = false;
};

int block_side(ShotType type, int size);

// Global group + one descriptor per shot, using the model's patch grid.
SceneLayout scene_layout(const SceneConfig& config, const ModelConfig& model, const StructuredPrompt& prompt,
                         const std::vector<Latent>& shots);

World sample_world(const SceneConfig& config, std::mt19937_64& rng);
GlobalPrompt describe_world(const World& world);

Latent render_shot(const World& world, const ShotPrompt& shot, const ShotMotion& motion, const SceneConfig& config,
                   std::uint64_t noise_seed);

SceneSample generate_scene(const SceneConfig& config, std::mt19937_64& rng);

// Fixed-length token sequences: [global, shot 0, shot 1, ...].
std::vector<std::vector<int>> encode_prompt(const StructuredPrompt& prompt, const SceneConfig& config);
std::vector<int> encode_global(const GlobalPrompt& global, int length);
std::vector<int> encode_shot(const ShotPrompt& shot, int length);
StructuredPrompt decode_prompt(const std::vector<std::vector<int>>& ids);
GlobalPrompt decode_global(const std::vector<int>& ids);
ShotPrompt decode_shot(const std::vector<int>& ids);

struct Region {
  Color color = Color::Zero();
  int pixels = 0;
};

struct Attributes {
  Color background = Color::Zero();
  int background_pixels = 0;
  std::map<int, Region> characters;  // by character id; absent ids were not found
};

// Segments by nearest mask level ({0} background, {(id+1)/3} character id)
// and averages the color channels of each region. Regions smaller than
// `min_pixels` are reported absent. `frame` restricts to one frame.
Attributes extract_attributes(const Latent& z, std::optional<int> frame = std::nullopt, int min_pixels = 4);

}  // namespace lct

// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lct {

namespace vocab {

std::string symbol(int token) {
  if (token == kPad) return "[PAD]";
  if (token == kSep) return "[SEP]";
  if (token == kShotCut) return "[SHOT CUT]";
  if (token == kGlobal) return "[GLOBAL]";
  if (token >= kCharacterBase && token < kCharacterBase + kMaxCharacters)
    return "Character " + std::to_string(token - kCharacterBase);
  if (token >= kColorBase && token < kColorBase + kColorCount) return "color-" + std::to_string(token - kColorBase);
  if (token >= kSizeBase && token < kSizeBase + kSizeCount) return "size-" + std::to_string(token - kSizeBase);
  if (token >= kEnvironmentBase && token < kEnvironmentBase + kEnvironmentCount)
    return "env-" + std::to_string(token - kEnvironmentBase);
  if (token >= kStoryBase && token < kStoryBase + kStoryCount) return "story-" + std::to_string(token - kStoryBase);
  if (token >= kShotTypeBase && token < kShotTypeBase + 3) return to_string(static_cast<ShotType>(token - kShotTypeBase));
  if (token >= kActionBase && token < kActionBase + kActionCount)
    return to_string(static_cast<Action>(token - kActionBase));
  if (token == kNoSubject) return "[NO SUBJECT]";
  throw VocabularyError("token " + std::to_string(token) + " is outside the vocabulary");
}

}  // namespace vocab

std::string to_string(ShotType type) {
  switch (type) {
    case ShotType::kWide:
      return "wide";
    case ShotType::kMid:
      return "mid";
    case ShotType::kClose:
      return "close";
  }
  return "wide";
}

std::string to_string(Action action) {
  static const char* names[] = {"idle", "left", "right", "up", "down"};
  return names[static_cast<int>(action)];
}

ShotType parse_shot_type(std::string_view text) {
  if (text == "wide") return ShotType::kWide;
  if (text == "mid") return ShotType::kMid;
  if (text == "close") return ShotType::kClose;
  throw VocabularyError("unknown shot type '" + std::string(text) + "'");
}

Action parse_action(std::string_view text) {
  for (int a = 0; a < vocab::kActionCount; ++a)
    if (text == to_string(static_cast<Action>(a))) return static_cast<Action>(a);
  throw VocabularyError("unknown action '" + std::string(text) + "'");
}

const std::array<Color, vocab::kColorCount>& character_palette() {
  static const std::array<Color, vocab::kColorCount> palette = [] {
    std::array<Color, vocab::kColorCount> p;
    for (int i = 0; i < vocab::kColorCount; ++i) {
      p[static_cast<std::size_t>(i)] =
          Color((i & 4) ? 0.85f : 0.15f, (i & 2) ? 0.85f : 0.15f, (i & 1) ? 0.85f : 0.15f);
    }
    return p;
  }();
  return palette;
}

const std::array<Color, vocab::kEnvironmentCount>& environment_palette() {
  static const std::array<Color, vocab::kEnvironmentCount> palette{
      Color(0.30f, 0.45f, 0.60f), Color(0.60f, 0.45f, 0.30f), Color(0.40f, 0.60f, 0.40f),
      Color(0.35f, 0.35f, 0.35f), Color(0.55f, 0.50f, 0.70f), Color(0.70f, 0.65f, 0.50f)};
  return palette;
}

const Character* World::find(int id) const {
  for (const auto& c : characters)
    if (c.id == id) return &c;
  return nullptr;
}

void SceneConfig::validate() const {
  if (min_shots < 1 || max_shots < min_shots) throw ConfigError("scene: need 1 <= min_shots <= max_shots");
  if (height < 1 || width < 1 || frames < 1) throw ConfigError("scene: grid sizes must be >= 1");
  if (max_characters < 1 || max_characters > vocab::kMaxCharacters) {
    throw ConfigError("scene: max_characters must be in [1, " + std::to_string(vocab::kMaxCharacters) + "]");
  }
  const int largest = block_side(ShotType::kClose, vocab::kSizeCount - 1);
  if (largest > std::min(height, width)) {
    throw ConfigError("scene: a close-up of the largest character (" + std::to_string(largest) +
                      " cells) does not fit a " + std::to_string(height) + "x" + std::to_string(width) + " frame");
  }
  if (global_text_len < 3 + 3 * max_characters) {
    throw ConfigError("scene: global_text_len must be >= " + std::to_string(3 + 3 * max_characters));
  }
  if (shot_text_len < 5) throw ConfigError("scene: shot_text_len must be >= 5");
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("scene: ") + name + " must be in [0, 1]");
  };
  probability(continuous_fraction, "continuous_fraction");
  probability(establishing_probability, "establishing_probability");
  if (!(color_jitter >= 0.0f && color_jitter <= 0.15f)) throw ConfigError("scene: color_jitter must be in [0, 0.15]");
  if (!(render_noise >= 0.0f && render_noise <= 0.02f)) throw ConfigError("scene: render_noise must be in [0, 0.02]");
}

int block_side(ShotType type, int size) { return 2 + static_cast<int>(type) + size; }

SceneLayout scene_layout(const SceneConfig& config, const ModelConfig& model, const StructuredPrompt& prompt,
                         const std::vector<Latent>& shots) {
  if (prompt.shots.size() != shots.size()) throw ShapeError("scene_layout: prompt and latent shot counts differ");
  SceneLayout layout;
  layout.shots.push_back(global_group(config.global_text_len));
  for (std::size_t k = 0; k < shots.size(); ++k) {
    auto s = shot_for_latent(shots[k], model, config.shot_text_len);
    s.shot_cut = prompt.shots[k].shot_cut;
    layout.shots.push_back(s);
  }
  return layout;
}

namespace {

Color jittered(const Color& base, float jitter, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-jitter, jitter);
  Color c = base;
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i] + dist(rng), 0.0f, 1.0f);
  return c;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::pair<int, int> velocity(Action action) {
  switch (action) {
    case Action::kLeft:
      return {-1, 0};
    case Action::kRight:
      return {1, 0};
    case Action::kUp:
      return {0, -1};
    case Action::kDown:
      return {0, 1};
    case Action::kIdle:
      break;
  }
  return {0, 0};
}

int wrap(int v, int n) { return ((v % n) + n) % n; }

std::uint64_t shot_noise_seed(std::uint64_t texture_seed, std::size_t shot) {
  return texture_seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(shot) + 1;
}

ShotPrompt random_shot(const World& world, const SceneConfig& config, std::mt19937_64& rng) {
  ShotPrompt shot;
  shot.type = static_cast<ShotType>(uniform_int(rng, 0, 2));
  shot.action = static_cast<Action>(uniform_int(rng, 0, vocab::kActionCount - 1));
  if (std::bernoulli_distribution(config.establishing_probability)(rng)) {
    shot.subject.reset();
  } else {
    shot.subject = world.characters[static_cast<std::size_t>(uniform_int(
                                        rng, 0, static_cast<int>(world.characters.size()) - 1))]
                       .id;
  }
  return shot;
}

}  // namespace

World sample_world(const SceneConfig& config, std::mt19937_64& rng) {
  config.validate();
  World world;
  const int n = uniform_int(rng, 1, config.max_characters);
  std::vector<int> colors(vocab::kColorCount);
  std::iota(colors.begin(), colors.end(), 0);
  for (int i = 0; i < n; ++i) {
    // Partial Fisher-Yates keeps palette entries distinct.
    const int j = uniform_int(rng, i, vocab::kColorCount - 1);
    std::swap(colors[static_cast<std::size_t>(i)], colors[static_cast<std::size_t>(j)]);
    Character c;
    c.id = i;
    c.palette = colors[static_cast<std::size_t>(i)];
    c.color = jittered(character_palette()[static_cast<std::size_t>(c.palette)], config.color_jitter, rng);
    c.size = uniform_int(rng, 0, vocab::kSizeCount - 1);
    world.characters.push_back(c);
  }
  world.environment.palette = uniform_int(rng, 0, vocab::kEnvironmentCount - 1);
  world.environment.background =
      jittered(environment_palette()[static_cast<std::size_t>(world.environment.palette)], config.color_jitter, rng);
  world.environment.texture_seed = rng();
  world.story = uniform_int(rng, 0, vocab::kStoryCount - 1);
  return world;
}

GlobalPrompt describe_world(const World& world) {
  GlobalPrompt g;
  for (const auto& c : world.characters) g.characters.push_back({c.id, c.palette, c.size});
  g.environment = world.environment.palette;
  g.story = world.story;
  return g;
}

Latent render_shot(const World& world, const ShotPrompt& shot, const ShotMotion& motion, const SceneConfig& config,
                   std::uint64_t noise_seed) {
  Latent z(4, config.height, config.width, config.frames);
  const Color& bg = world.environment.background;
  for (int y = 0; y < config.height; ++y)
    for (int x = 0; x < config.width; ++x)
      for (int f = 0; f < config.frames; ++f)
        for (int c = 0; c < 3; ++c) z.at(c, y, x, f) = bg[c];

  if (shot.subject) {
    const Character* ch = world.find(*shot.subject);
    if (ch == nullptr) throw ConfigError("shot subject Character " + std::to_string(*shot.subject) + " is not in the world");
    const int side = block_side(shot.type, ch->size);
    if (side > std::min(config.height, config.width)) throw ConfigError("character block larger than the frame");
    const auto [vx, vy] = velocity(shot.action);
    const float level = static_cast<float>(ch->id + 1) / 3.0f;
    for (int f = 0; f < config.frames; ++f) {
      const int x0 = motion.x0 + vx * f;
      const int y0 = motion.y0 + vy * f;
      for (int dy = 0; dy < side; ++dy)
        for (int dx = 0; dx < side; ++dx) {
          const int y = wrap(y0 + dy, config.height);
          const int x = wrap(x0 + dx, config.width);
          for (int c = 0; c < 3; ++c) z.at(c, y, x, f) = ch->color[c];
          z.at(3, y, x, f) = level;
        }
    }
  }

  if (config.render_noise > 0.0f) {
    std::mt19937_64 rng(noise_seed);
    std::uniform_real_distribution<float> noise(-config.render_noise, config.render_noise);
    for (Index i = 0; i < z.size(); ++i) z.data[i] += noise(rng);
  }
  return z;
}

SceneSample generate_scene(const SceneConfig& config, std::mt19937_64& rng) {
  SceneSample sample;
  sample.world = sample_world(config, rng);
  sample.prompt.global = describe_world(sample.world);
  const int n = uniform_int(rng, config.min_shots, config.max_shots);
  sample.continuous = std::bernoulli_distribution(config.continuous_fraction)(rng);

  ShotMotion motion{uniform_int(rng, 0, config.width - 1), uniform_int(rng, 0, config.height - 1)};
  ShotPrompt continued = random_shot(sample.world, config, rng);
  for (int k = 0; k < n; ++k) {
    ShotPrompt shot;
    if (sample.continuous) {
      // Sub-segments of one long take: same subject and motion, no cut.
      shot = continued;
      shot.shot_cut = false;
      if (k > 0) {
        const auto [vx, vy] = velocity(shot.action);
        motion.x0 = wrap(motion.x0 + vx * config.frames, config.width);
        motion.y0 = wrap(motion.y0 + vy * config.frames, config.height);
      }
    } else {
      shot = k == 0 ? continued : random_shot(sample.world, config, rng);
      shot.shot_cut = k > 0;
      if (k > 0) motion = {uniform_int(rng, 0, config.width - 1), uniform_int(rng, 0, config.height - 1)};
    }
    sample.prompt.shots.push_back(shot);
    sample.motions.push_back(motion);
    sample.shots.push_back(render_shot(sample.world, shot, motion, config,
                                       shot_noise_seed(sample.world.environment.texture_seed, static_cast<std::size_t>(k))));
  }
  return sample;
}

// ---------------------------------------------------------------------------
// Prompt encoding

namespace {

void check_range(int value, int count, const char* what) {
  if (value < 0 || value >= count) {
    throw VocabularyError(std::string(what) + " " + std::to_string(value) + " is outside the vocabulary");
  }
}

int expect_in(int token, int base, int count, const char* what) {
  if (token < base || token >= base + count) {
    throw VocabularyError(std::string("expected ") + what + " token, got " + std::to_string(token));
  }
  return token - base;
}

}  // namespace

std::vector<int> encode_global(const GlobalPrompt& global, int length) {
  std::vector<int> ids{vocab::kGlobal};
  check_range(global.story, vocab::kStoryCount, "story");
  check_range(global.environment, vocab::kEnvironmentCount, "environment");
  ids.push_back(vocab::kStoryBase + global.story);
  ids.push_back(vocab::kEnvironmentBase + global.environment);
  for (const auto& c : global.characters) {
    check_range(c.id, vocab::kMaxCharacters, "character id");
    check_range(c.color, vocab::kColorCount, "color");
    check_range(c.size, vocab::kSizeCount, "size");
    ids.push_back(vocab::kCharacterBase + c.id);
    ids.push_back(vocab::kColorBase + c.color);
    ids.push_back(vocab::kSizeBase + c.size);
  }
  if (static_cast<int>(ids.size()) > length) {
    throw VocabularyError("global prompt needs " + std::to_string(ids.size()) + " tokens, budget is " +
                          std::to_string(length));
  }
  ids.resize(static_cast<std::size_t>(length), vocab::kPad);
  return ids;
}

std::vector<int> encode_shot(const ShotPrompt& shot, int length) {
  if (length < 5) throw VocabularyError("shot prompt budget must be >= 5 tokens");
  std::vector<int> ids(static_cast<std::size_t>(length), vocab::kPad);
  ids[0] = shot.shot_cut ? vocab::kShotCut : vocab::kPad;
  check_range(static_cast<int>(shot.type), 3, "shot type");
  check_range(static_cast<int>(shot.action), vocab::kActionCount, "action");
  ids[1] = vocab::kShotTypeBase + static_cast<int>(shot.type);
  if (shot.subject) {
    check_range(*shot.subject, vocab::kMaxCharacters, "character id");
    ids[2] = vocab::kCharacterBase + *shot.subject;
  } else {
    ids[2] = vocab::kNoSubject;
  }
  ids[3] = vocab::kActionBase + static_cast<int>(shot.action);
  ids[4] = vocab::kSep;
  return ids;
}

std::vector<std::vector<int>> encode_prompt(const StructuredPrompt& prompt, const SceneConfig& config) {
  std::vector<std::vector<int>> out;
  out.push_back(encode_global(prompt.global, config.global_text_len));
  for (const auto& s : prompt.shots) out.push_back(encode_shot(s, config.shot_text_len));
  return out;
}

GlobalPrompt decode_global(const std::vector<int>& ids) {
  if (ids.size() < 3 || ids[0] != vocab::kGlobal) throw VocabularyError("global prompt must start with [GLOBAL]");
  GlobalPrompt g;
  g.story = expect_in(ids[1], vocab::kStoryBase, vocab::kStoryCount, "story");
  g.environment = expect_in(ids[2], vocab::kEnvironmentBase, vocab::kEnvironmentCount, "environment");
  std::size_t i = 3;
  while (i < ids.size() && ids[i] != vocab::kPad) {
    if (i + 3 > ids.size()) throw VocabularyError("truncated character entry in global prompt");
    GlobalPrompt::Entry e;
    e.id = expect_in(ids[i], vocab::kCharacterBase, vocab::kMaxCharacters, "character");
    e.color = expect_in(ids[i + 1], vocab::kColorBase, vocab::kColorCount, "color");
    e.size = expect_in(ids[i + 2], vocab::kSizeBase, vocab::kSizeCount, "size");
    g.characters.push_back(e);
    i += 3;
  }
  for (; i < ids.size(); ++i)
    if (ids[i] != vocab::kPad) throw VocabularyError("unexpected token after global prompt padding");
  return g;
}

ShotPrompt decode_shot(const std::vector<int>& ids) {
  if (ids.size() < 5) throw VocabularyError("shot prompt too short");
  ShotPrompt s;
  if (ids[0] == vocab::kShotCut) {
    s.shot_cut = true;
  } else if (ids[0] != vocab::kPad) {
    throw VocabularyError("shot prompt must start with [SHOT CUT] or padding");
  }
  s.type = static_cast<ShotType>(expect_in(ids[1], vocab::kShotTypeBase, 3, "shot type"));
  if (ids[2] != vocab::kNoSubject) s.subject = expect_in(ids[2], vocab::kCharacterBase, vocab::kMaxCharacters, "subject");
  s.action = static_cast<Action>(expect_in(ids[3], vocab::kActionBase, vocab::kActionCount, "action"));
  if (ids[4] != vocab::kSep) throw VocabularyError("shot prompt missing [SEP]");
  for (std::size_t i = 5; i < ids.size(); ++i)
    if (ids[i] != vocab::kPad) throw VocabularyError("unexpected token after shot prompt");
  return s;
}

StructuredPrompt decode_prompt(const std::vector<std::vector<int>>& ids) {
  if (ids.empty()) throw VocabularyError("empty prompt");
  StructuredPrompt p;
  p.global = decode_global(ids[0]);
  for (std::size_t k = 1; k < ids.size(); ++k) p.shots.push_back(decode_shot(ids[k]));
  return p;
}

// ---------------------------------------------------------------------------
// Attribute extraction

Attributes extract_attributes(const Latent& z, std::optional<int> frame, int min_pixels) {
  if (z.channels < 4) throw ShapeError("extract_attributes: latent needs 3 color channels and a mask channel");
  if (frame && (*frame < 0 || *frame >= z.frames)) {
    throw ShapeError("extract_attributes: frame " + std::to_string(*frame) + " out of range");
  }
  const int f_begin = frame ? *frame : 0;
  const int f_end = frame ? *frame + 1 : z.frames;
  std::array<Eigen::Vector3d, vocab::kMaxCharacters + 1> sums;
  std::array<int, vocab::kMaxCharacters + 1> counts{};
  for (auto& s : sums) s.setZero();
  for (int y = 0; y < z.height; ++y)
    for (int x = 0; x < z.width; ++x)
      for (int f = f_begin; f < f_end; ++f) {
        const float m = z.at(3, y, x, f);
        const int level = std::clamp(static_cast<int>(std::lround(m * 3.0f)), 0, vocab::kMaxCharacters);
        for (int c = 0; c < 3; ++c) sums[static_cast<std::size_t>(level)][c] += z.at(c, y, x, f);
        ++counts[static_cast<std::size_t>(level)];
      }
  Attributes a;
  a.background_pixels = counts[0];
  if (counts[0] > 0) a.background = (sums[0] / counts[0]).cast<float>();
  for (int id = 0; id < vocab::kMaxCharacters; ++id) {
    const auto lvl = static_cast<std::size_t>(id + 1);
    if (counts[lvl] >= std::max(1, min_pixels)) {
      a.characters[id] = Region{(sums[lvl] / counts[lvl]).cast<float>(), counts[lvl]};
    }
  }
  return a;
}

}  // namespace lct

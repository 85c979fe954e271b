// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/scenegen.hpp"

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "lct/errors.hpp"
#include "lct/prompt_json.hpp"

namespace lct {
namespace {

World one_character_world(int size = 1) {
  World w;
  w.characters.push_back({0, 5, Color(0.85f, 0.15f, 0.85f), size});
  w.environment = {2, Color(0.3f, 0.6f, 0.4f), 9};
  w.story = 3;
  return w;
}

TEST(Vocabulary, SymbolTableCoversFortyOneTokens) {
  EXPECT_EQ(vocab::kSize, 41);
  EXPECT_EQ(vocab::symbol(vocab::kShotCut), "[SHOT CUT]");
  EXPECT_EQ(vocab::symbol(vocab::kCharacterBase + 2), "Character 2");
  EXPECT_EQ(vocab::symbol(vocab::kActionBase + 1), "left");
  EXPECT_THROW(vocab::symbol(41), VocabularyError);
  std::set<std::string> names;
  for (int t = 0; t < vocab::kSize; ++t) names.insert(vocab::symbol(t));
  EXPECT_EQ(names.size(), 41u);
}

TEST(Prompt, HandEncodedShot) {
  ShotPrompt s{ShotType::kClose, 1, Action::kLeft, true};
  const std::vector<int> want{vocab::kShotCut, 34, 5, 36, vocab::kSep, 0, 0, 0};
  EXPECT_EQ(encode_shot(s, 8), want);
  s.shot_cut = false;
  s.subject.reset();
  const std::vector<int> establishing{vocab::kPad, 34, vocab::kNoSubject, 36, vocab::kSep, 0, 0, 0};
  EXPECT_EQ(encode_shot(s, 8), establishing);
}

TEST(Prompt, HandEncodedGlobal) {
  GlobalPrompt g{{{0, 5, 1}, {2, 0, 2}}, 4, 7};
  const std::vector<int> want{vocab::kGlobal, 31, 22, 4, 12, 16, 6, 7, 17, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(encode_global(g, 16), want);
}

TEST(Prompt, CutAndNoCutDifferOnlyInLeadingToken) {
  ShotPrompt s{ShotType::kMid, 0, Action::kDown, true};
  auto a = encode_shot(s, 8);
  s.shot_cut = false;
  auto b = encode_shot(s, 8);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_NE(a[0], b[0]);
}

TEST(Prompt, EncodeDecodeRoundTripOnGeneratedScenes) {
  SceneConfig config;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto scene = generate_scene(config, rng);
    EXPECT_EQ(decode_prompt(encode_prompt(scene.prompt, config)), scene.prompt);
  }
}

TEST(Prompt, OutOfVocabularyAndOverlongInputsThrow) {
  EXPECT_THROW(encode_shot(ShotPrompt{ShotType::kWide, 3, Action::kIdle, false}, 8), VocabularyError);
  EXPECT_THROW(encode_global(GlobalPrompt{{}, 6, 0}, 16), VocabularyError);
  GlobalPrompt g{{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}, 0, 0};
  EXPECT_THROW(encode_global(g, 8), VocabularyError);
  EXPECT_THROW(decode_shot({0, 34, 5, 36, 1, 9, 0, 0}), VocabularyError);
  EXPECT_THROW(decode_global({vocab::kSep, 24, 18}), VocabularyError);
}

TEST(PromptJson, RoundTripAndStrictness) {
  StructuredPrompt p{{{{0, 3, 2}, {1, 6, 0}}, 1, 2}, {{ShotType::kClose, 1, Action::kUp, true}, {ShotType::kWide, {}, Action::kIdle, false}}};
  EXPECT_EQ(structured_prompt_from_json(to_json(p)), p);
  auto bad = to_json(p);
  bad["shots"][0]["colour"] = 1;
  EXPECT_THROW(structured_prompt_from_json(bad), VocabularyError);
  bad = to_json(p);
  bad["shots"][0]["subject"] = 2;  // not in the global prompt
  EXPECT_THROW(structured_prompt_from_json(bad), VocabularyError);
  bad = to_json(p);
  bad["global"]["characters"][1]["id"] = 0;  // duplicate id
  EXPECT_THROW(structured_prompt_from_json(bad), VocabularyError);
  bad = to_json(p);
  bad["shots"][0]["type"] = "extreme";
  EXPECT_THROW(structured_prompt_from_json(bad), VocabularyError);
  EXPECT_THROW(structured_prompt_from_json(nlohmann::json::array()), VocabularyError);
}

TEST(Render, EstablishingShotIsUniformBackground) {
  SceneConfig config;
  const auto world = one_character_world();
  const auto z = render_shot(world, ShotPrompt{ShotType::kWide, {}, Action::kIdle, false}, {0, 0}, config, 5);
  for (int y = 0; y < config.height; ++y)
    for (int x = 0; x < config.width; ++x)
      for (int f = 0; f < config.frames; ++f) {
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(z.at(c, y, x, f), world.environment.background[c], 0.01f);
        EXPECT_NEAR(z.at(3, y, x, f), 0.0f, 0.01f);
      }
}

TEST(Render, BlockSizePositionAndMotion) {
  SceneConfig config;
  config.render_noise = 0.0f;
  const auto world = one_character_world(1);
  const ShotPrompt shot{ShotType::kMid, 0, Action::kRight, false};
  const int side = block_side(shot.type, 1);
  EXPECT_EQ(side, 4);
  const auto z = render_shot(world, shot, {6, 1}, config, 0);
  for (int f = 0; f < config.frames; ++f) {
    int covered = 0;
    for (int y = 0; y < config.height; ++y)
      for (int x = 0; x < config.width; ++x) {
        // Moving right one cell per frame with wraparound.
        const int dx = ((x - (6 + f)) % 8 + 8) % 8;
        const bool inside = y >= 1 && y < 1 + side && dx < side;
        EXPECT_EQ(z.at(3, y, x, f), inside ? 1.0f / 3.0f : 0.0f) << y << "," << x << "," << f;
        if (inside) {
          ++covered;
          EXPECT_EQ(z.at(0, y, x, f), world.characters[0].color[0]);
        }
      }
    EXPECT_EQ(covered, side * side);
  }
}

TEST(Render, NoiseIsBoundedAndSeeded) {
  SceneConfig config;
  const auto world = one_character_world();
  const ShotPrompt shot{ShotType::kClose, 0, Action::kIdle, false};
  const auto a = render_shot(world, shot, {0, 0}, config, 42);
  EXPECT_EQ(a, render_shot(world, shot, {0, 0}, config, 42));
  EXPECT_NE(a, render_shot(world, shot, {0, 0}, config, 43));
  config.render_noise = 0.0f;
  const auto clean = render_shot(world, shot, {0, 0}, config, 42);
  EXPECT_LE((a.data - clean.data).cwiseAbs().maxCoeff(), 0.01f);
}

TEST(Render, SubjectMissingFromWorldIsConfigError) {
  SceneConfig config;
  EXPECT_THROW(render_shot(one_character_world(), ShotPrompt{ShotType::kWide, 2, Action::kIdle, false}, {0, 0}, config, 0),
               ConfigError);
}

TEST(Extract, RecoversRenderedColorsWithinNoise) {
  SceneConfig config;
  const auto world = one_character_world(2);
  const auto z = render_shot(world, ShotPrompt{ShotType::kWide, 0, Action::kLeft, false}, {3, 3}, config, 8);
  const auto a = extract_attributes(z);
  ASSERT_EQ(a.characters.count(0), 1u);
  EXPECT_EQ(a.characters.at(0).pixels, 16 * config.frames);
  EXPECT_LT((a.characters.at(0).color - world.characters[0].color).cwiseAbs().maxCoeff(), 0.01f);
  EXPECT_LT((a.background - world.environment.background).cwiseAbs().maxCoeff(), 0.01f);
  EXPECT_EQ(a.background_pixels, 64 * config.frames - 16 * config.frames);
}

TEST(Extract, SmallRegionsAreAbsentAndFramesSelectable) {
  Latent z(4, 4, 4, 2);
  z.at(3, 0, 0, 0) = 2.0f / 3.0f;  // one pixel of character 1
  EXPECT_EQ(extract_attributes(z).characters.count(1), 0u);
  EXPECT_EQ(extract_attributes(z, 0, 1).characters.count(1), 1u);
  EXPECT_EQ(extract_attributes(z, 1, 1).characters.count(1), 0u);
  EXPECT_THROW(extract_attributes(z, 2), ShapeError);
}

TEST(Scenes, StructuralInvariants) {
  SceneConfig config;
  std::mt19937_64 rng(17);
  int continuous = 0;
  const int n = 300;
  for (int i = 0; i < n; ++i) {
    const auto s = generate_scene(config, rng);
    ASSERT_GE(s.shots.size(), 2u);
    ASSERT_LE(s.shots.size(), 5u);
    ASSERT_EQ(s.prompt.shots.size(), s.shots.size());
    std::set<int> palettes;
    for (const auto& c : s.world.characters) {
      palettes.insert(c.palette);
      EXPECT_LE((c.color - character_palette()[static_cast<std::size_t>(c.palette)]).cwiseAbs().maxCoeff(), 0.1f + 1e-6f);
    }
    EXPECT_EQ(palettes.size(), s.world.characters.size());
    for (std::size_t k = 0; k < s.shots.size(); ++k) {
      const auto& p = s.prompt.shots[k];
      if (s.continuous) {
        EXPECT_FALSE(p.shot_cut);
        EXPECT_EQ(p, s.prompt.shots[0]);
      } else {
        EXPECT_EQ(p.shot_cut, k > 0);
      }
      if (p.subject) {
        const auto a = extract_attributes(s.shots[k]);
        ASSERT_EQ(a.characters.count(*p.subject), 1u);
        EXPECT_LT((a.characters.at(*p.subject).color - s.world.find(*p.subject)->color).cwiseAbs().maxCoeff(), 0.01f);
      }
    }
    continuous += s.continuous ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(continuous) / n, 2.0 / 3.0, 0.1);
}

TEST(Scenes, ContinuousScenesContinueMotion) {
  SceneConfig config;
  config.render_noise = 0.0f;
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int i = 0; i < 100 && checked < 10; ++i) {
    const auto s = generate_scene(config, rng);
    if (!s.continuous || !s.prompt.shots[0].subject || s.prompt.shots[0].action == Action::kIdle) continue;
    // The first frame of shot k+1 is what frame F of shot k would have been.
    for (std::size_t k = 0; k + 1 < s.shots.size(); ++k) {
      ShotMotion next = s.motions[k];
      const int step = config.frames;
      switch (s.prompt.shots[0].action) {
        case Action::kLeft: next.x0 -= step; break;
        case Action::kRight: next.x0 += step; break;
        case Action::kUp: next.y0 -= step; break;
        case Action::kDown: next.y0 += step; break;
        default: break;
      }
      EXPECT_EQ(((next.x0 % 8) + 8) % 8, s.motions[k + 1].x0);
      EXPECT_EQ(((next.y0 % 8) + 8) % 8, s.motions[k + 1].y0);
    }
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}

TEST(Scenes, DeterministicUnderSeed) {
  SceneConfig config;
  std::mt19937_64 a(5);
  std::mt19937_64 b(5);
  for (int i = 0; i < 10; ++i) {
    const auto x = generate_scene(config, a);
    const auto y = generate_scene(config, b);
    EXPECT_EQ(x.prompt, y.prompt);
    ASSERT_EQ(x.shots.size(), y.shots.size());
    for (std::size_t k = 0; k < x.shots.size(); ++k) EXPECT_EQ(x.shots[k], y.shots[k]);
  }
}

TEST(SceneConfig, RejectsBlocksThatDoNotFit) {
  SceneConfig config;
  config.height = 5;
  EXPECT_THROW(config.validate(), ConfigError);
  config = SceneConfig{};
  config.max_characters = 4;
  EXPECT_THROW(config.validate(), ConfigError);
}

}  // namespace
}  // namespace lct

// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "lct/grad_check.hpp"
#include "lct/mmdit.hpp"
#include "test_util.hpp"

namespace lct {
namespace {

using testing::make_shot;
using testing::max_abs_diff;
using testing::random_scene;
using testing::tiny_config;

TEST(TimestepEmbed, EqualTimestepsGiveEqualRows) {
  auto w = init_model<float>(tiny_config(), 1, InitScheme::kRandom);
  const double t[] = {0.5, 0.5};
  auto e = timestep_embed(w, std::span<const double>(t)).value();
  EXPECT_EQ(Matrix<float>(e.row(0)), Matrix<float>(e.row(1)));
}

TEST(TimestepEmbed, EndpointsDiffer) {
  auto w = init_model<float>(tiny_config(), 1, InitScheme::kRandom);
  const double t0[] = {0.0};
  const double t1[] = {1.0};
  auto a = timestep_embed(w, std::span<const double>(t0)).value();
  auto b = timestep_embed(w, std::span<const double>(t1)).value();
  EXPECT_GT((a - b).norm(), 0.0f);
}

TEST(TimestepEmbed, DeterministicAndDomainChecked) {
  auto w = init_model<float>(tiny_config(), 1, InitScheme::kRandom);
  const double t[] = {0.123};
  EXPECT_EQ(timestep_embed(w, std::span<const double>(t)).value(), timestep_embed(w, std::span<const double>(t)).value());
  const double bad[] = {1.5};
  EXPECT_THROW(timestep_embed(w, std::span<const double>(bad)), DomainError);
  const double neg[] = {-0.01};
  EXPECT_THROW(timestep_embed(w, std::span<const double>(neg)), DomainError);
}

TEST(BuildMask, SingleShotBidirectionalAllTrue) {
  auto mask = build_mask(SceneLayout{{make_shot(3, 2, 2, 1)}}, AttentionMode::kBidirectional);
  EXPECT_EQ(mask.size, 7);
  EXPECT_TRUE(mask.all_allowed());
}

TEST(BuildMask, TwoShotContextCausalIsBlockLowerTriangular) {
  // Two shots of 5 tokens each: text 1 + 2x2x1 video.
  SceneLayout layout{{make_shot(1, 2, 2, 1), make_shot(1, 2, 2, 1)}};
  auto mask = build_mask(layout, AttentionMode::kContextCausal);
  ASSERT_EQ(mask.size, 10);
  for (Index i = 0; i < 10; ++i) {
    for (Index j = 0; j < 10; ++j) {
      const bool expected = i < 5 ? j < 5 : true;
      EXPECT_EQ(mask.at(i, j), expected) << i << "," << j;
    }
  }
}

TEST(BuildMask, CausalEqualsBidirectionalForOneShot) {
  SceneLayout layout{{make_shot(4, 2, 3, 2)}};
  EXPECT_EQ(build_mask(layout, AttentionMode::kContextCausal).allowed,
            build_mask(layout, AttentionMode::kBidirectional).allowed);
}

TEST(BuildMask, GlobalGroupVisibleToAllAndSeesOnlyItself) {
  SceneLayout layout{{global_group(2), make_shot(1, 1, 1, 1), make_shot(1, 1, 1, 1)}};
  auto mask = build_mask(layout, AttentionMode::kContextCausal);
  // Global group tokens are 0..2.
  for (Index i = 0; i < mask.size; ++i) {
    for (Index j = 0; j < 3; ++j) EXPECT_TRUE(mask.at(i, j));
  }
  for (Index j = 3; j < mask.size; ++j) {
    for (Index i = 0; i < 3; ++i) EXPECT_FALSE(mask.at(i, j));
  }
}

TEST(BlockForward, ZeroGatesGiveResidualIdentity) {
  auto config = tiny_config();
  auto w = init_model<float>(config, 3, InitScheme::kRandom);
  auto& block = w.blocks[0];
  for (auto* s : {&block.text, &block.video}) {
    s->out_w.mutable_value().setZero();
    s->out_b.mutable_value().setZero();
    s->mlp_out_w.mutable_value().setZero();
    s->mlp_out_b.mutable_value().setZero();
    s->mod_w.mutable_value().setZero();
    s->mod_b.mutable_value().setZero();
  }
  std::mt19937_64 rng(4);
  const auto shot = make_shot(3, 2, 2, 1);
  Tensor<float> text(testing::normal_matrix<float>(3, config.d_model, rng));
  Tensor<float> video(testing::normal_matrix<float>(4, config.d_model, rng));
  auto rope = make_rope_table<float>(shot_coords(shot, 0), config.head_dim());
  auto mod = Tensor<float>::zeros(1, 6 * config.d_model);
  auto out = block_forward(block, text, video, mod, mod, rope, nullptr, config.heads);
  EXPECT_EQ(out.text.value(), text.value());
  EXPECT_EQ(out.video.value(), video.value());
}

TEST(Forward, FreshModelIsFinite) {
  auto config = tiny_config();
  auto w = init_model<float>(config, 5);
  std::mt19937_64 rng(6);
  SceneLayout layout{{global_group(4), make_shot(3, 2, 2, 2), make_shot(3, 2, 2, 1)}};
  auto out = forward(w, random_scene<float>(layout, config, rng), AttentionMode::kBidirectional);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].rows(), 8);
  EXPECT_EQ(out[1].rows(), 4);
  for (const auto& o : out) EXPECT_TRUE(o.value().allFinite());
}

TEST(Forward, OneShotSceneMatchesSingleShotPathBitwise) {
  auto config = tiny_config();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto w = init_model<float>(config, 100 + trial, InitScheme::kRandom);
    const auto shot = make_shot(2 + trial % 3, 2, 1 + trial % 2, 2);
    SceneLayout layout{{shot}};
    auto in = random_scene<float>(layout, config, rng);
    for (auto mode : {AttentionMode::kBidirectional, AttentionMode::kContextCausal}) {
      auto full = forward(w, in, mode);
      auto ref = single_shot_forward(w, shot, std::span<const int>(in.prompt_ids[0]), in.video_tokens[0], in.t_shots[0]);
      ASSERT_EQ(full.size(), 1u);
      EXPECT_TRUE(full[0].value() == ref.value()) << "trial " << trial;
    }
  }
}

TEST(Forward, CausalOutputsIgnoreFutureShots) {
  auto config = tiny_config();
  auto w = init_model<float>(config, 9, InitScheme::kRandom);
  std::mt19937_64 rng(10);
  SceneLayout layout{{global_group(3), make_shot(2, 2, 2, 1), make_shot(2, 2, 1, 2), make_shot(2, 1, 2, 2)}};
  auto in = random_scene<float>(layout, config, rng);
  auto base = forward(w, in, AttentionMode::kContextCausal);
  auto perturbed = in;
  perturbed.video_tokens[3] = testing::normal_matrix<float>(4, config.patch_dim(), rng);
  perturbed.prompt_ids[3] = {1, 2};
  perturbed.t_shots[3] = 0.91;
  perturbed.video_tokens[2].array() += 0.5f;
  auto out = forward(w, perturbed, AttentionMode::kContextCausal);
  EXPECT_TRUE(out[0].value() == base[0].value());
  EXPECT_FALSE(out[1].value() == base[1].value());
  // Bidirectional attention does propagate the change backwards.
  auto bidi_base = forward(w, in, AttentionMode::kBidirectional);
  auto bidi_out = forward(w, perturbed, AttentionMode::kBidirectional);
  EXPECT_FALSE(bidi_out[0].value() == bidi_base[0].value());
}

TEST(Forward, ShotPermutationWithCoordsIsEquivariantBidirectional) {
  auto config = tiny_config();
  auto w = init_model<float>(config, 11, InitScheme::kRandom);
  std::mt19937_64 rng(12);
  SceneLayout layout{{make_shot(2, 2, 2, 1), make_shot(3, 1, 2, 2), make_shot(2, 2, 1, 1)}};
  auto in = random_scene<float>(layout, config, rng);
  const auto coords = assign_coords(layout);
  auto base = forward(w, in, AttentionMode::kBidirectional);

  const std::vector<int> perm{2, 0, 1};
  SceneInput<float> p;
  std::vector<std::size_t> starts;
  std::size_t at = 0;
  for (const auto& s : layout.shots) {
    starts.push_back(at);
    at += static_cast<std::size_t>(s.token_count());
  }
  for (int k : perm) {
    const auto uk = static_cast<std::size_t>(k);
    p.layout.shots.push_back(layout.shots[uk]);
    p.prompt_ids.push_back(in.prompt_ids[uk]);
    p.video_tokens.push_back(in.video_tokens[uk]);
    p.t_shots.push_back(in.t_shots[uk]);
    p.coords.insert(p.coords.end(), coords.begin() + static_cast<std::ptrdiff_t>(starts[uk]),
                    coords.begin() + static_cast<std::ptrdiff_t>(starts[uk] + static_cast<std::size_t>(layout.shots[uk].token_count())));
  }
  auto out = forward(w, p, AttentionMode::kBidirectional);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_LE(max_abs_diff(out[i].value(), base[static_cast<std::size_t>(perm[i])].value()), 1e-5);
  }
}

SceneInput<float> sub_scene(const SceneInput<float>& in, int shots) {
  SceneInput<float> s;
  for (int k = 0; k < shots; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    s.layout.shots.push_back(in.layout.shots[uk]);
    s.prompt_ids.push_back(in.prompt_ids[uk]);
    s.video_tokens.push_back(in.video_tokens[uk]);
    s.t_shots.push_back(in.t_shots[uk]);
  }
  return s;
}

ShotInput<float> shot_input(const SceneInput<float>& in, int k) {
  const auto uk = static_cast<std::size_t>(k);
  return {in.layout.shots[uk], in.prompt_ids[uk], in.video_tokens[uk], in.t_shots[uk]};
}

TEST(ForwardWithCache, FirstShotMatchesFullForward) {
  auto config = tiny_config();
  auto w = init_model<float>(config, 13, InitScheme::kRandom);
  std::mt19937_64 rng(14);
  SceneLayout layout{{make_shot(3, 2, 2, 2)}};
  auto in = random_scene<float>(layout, config, rng);
  KVCache<float> cache(config);
  auto step = forward_with_cache(w, shot_input(in, 0), cache);
  auto full = forward(w, in, AttentionMode::kContextCausal);
  EXPECT_LE(max_abs_diff(step.velocity, full[0].value()), 1e-5);
}

TEST(ForwardWithCache, SequentialDecodeMatchesFullCausalForward) {
  auto config = tiny_config();
  auto w = init_model<float>(config, 15, InitScheme::kRandom);
  std::mt19937_64 rng(16);
  SceneLayout layout{{global_group(4), make_shot(3, 2, 2, 2), make_shot(2, 2, 1, 2), make_shot(3, 1, 2, 2)}};
  auto in = random_scene<float>(layout, config, rng);
  auto full = forward(w, in, AttentionMode::kContextCausal);
  KVCache<float> cache(config);
  Index expected_tokens = 0;
  for (int k = 0; k < layout.shot_count(); ++k) {
    auto step = forward_with_cache(w, shot_input(in, k), cache);
    if (k > 0) {
      EXPECT_LE(max_abs_diff(step.velocity, full[static_cast<std::size_t>(k - 1)].value()), 1e-5) << "shot " << k;
    } else {
      EXPECT_EQ(step.velocity.size(), 0);
    }
    cache.append(step.kv);
    expected_tokens += layout.shots[static_cast<std::size_t>(k)].token_count();
    for (int b = 0; b < config.blocks; ++b) EXPECT_EQ(cache.keys(b).rows(), expected_tokens);
  }
  EXPECT_EQ(cache.layout(), layout);
}

TEST(ForwardWithCache, InconsistentSessionsAreRejected) {
  auto config = tiny_config();
  auto w = init_model<float>(config, 17, InitScheme::kRandom);
  std::mt19937_64 rng(18);
  SceneLayout layout{{global_group(2), make_shot(2, 1, 1, 1)}};
  auto in = random_scene<float>(layout, config, rng);
  KVCache<float> cache(config);
  cache.append(forward_with_cache(w, shot_input(in, 0), cache).kv);
  EXPECT_THROW(forward_with_cache(w, shot_input(in, 0), cache), SessionError);
  KVCache<float> other(tiny_config(32, 2, 3));
  EXPECT_THROW(forward_with_cache(w, shot_input(in, 1), other), SessionError);
  EXPECT_THROW(forward_with_cache(w, shot_input(in, 1), KVCache<float>{}), SessionError);
}

TEST(Gradients, BlockParametersPassGradCheckOnTinyScene) {
  auto config = tiny_config(12, 2, 1);
  auto w = init_model<double>(config, 19, InitScheme::kRandom);
  std::mt19937_64 rng(20);
  SceneLayout layout{{make_shot(2, 1, 2, 1), make_shot(1, 2, 1, 1)}};
  auto in = random_scene<double>(layout, config, rng);
  std::vector<Matrix<double>> targets;
  for (const auto& s : layout.shots) targets.push_back(testing::normal_matrix<double>(s.video_tokens(), config.patch_dim(), rng));
  std::function<Tensor<double>(const Tensor<double>&)> loss = [&](const Tensor<double>&) {
    auto out = forward(w, in, AttentionMode::kContextCausal);
    Tensor<double> total = Tensor<double>::zeros(1, 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
      auto diff = sub(out[k], Tensor<double>(targets[k]));
      total = add(total, mean(mul(diff, diff)));
    }
    return total;
  };
  for (const auto& [name, param] : w.parameters()) {
    if (name.rfind("blocks.0.video.qkv", 0) != 0 && name.rfind("blocks.0.text.mod", 0) != 0) continue;
    auto report = grad_check(loss, param, {1e-5, 1e-3, 1e-7});
    EXPECT_TRUE(report.pass) << name << " max rel err " << report.max_rel_err;
  }
}

}  // namespace
}  // namespace lct

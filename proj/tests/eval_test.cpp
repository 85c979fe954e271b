// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/eval.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "lct/errors.hpp"
#include "test_util.hpp"

namespace lct {
namespace {

TrainConfig smoke() {
  auto c = load_train_config(testing::source_path("configs/smoke.json"));
  return c;
}

const ModelWeights<float>& random_weights() {
  static const auto w = init_model<float>(smoke().model, 8, InitScheme::kRandom);
  return w;
}

Latent solid(const Color& color, int id, int cells) {
  Latent z(4, 8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const bool inside = y * 8 + x < cells;
      for (int c = 0; c < 3; ++c) z.at(c, y, x, 0) = inside ? color[c] : 0.5f;
      z.at(3, y, x, 0) = inside ? static_cast<float>(id + 1) / 3.0f : 0.0f;
    }
  return z;
}

StructuredPrompt subject_prompt(int n, int subject) {
  StructuredPrompt p;
  p.global.characters = {{subject, 0, 0}};
  for (int k = 0; k < n; ++k) p.shots.push_back({ShotType::kWide, subject, Action::kIdle, k > 0});
  return p;
}

TEST(ConsistencySuite, EveryShotFeaturesOneSubjectWithCuts) {
  const SceneConfig config;
  const auto suite = consistency_suite(config, 20, 3, 9);
  ASSERT_EQ(suite.size(), 20u);
  for (const auto& s : suite) {
    ASSERT_EQ(s.shots.size(), 3u);
    const auto subject = s.prompt.shots[0].subject;
    ASSERT_TRUE(subject.has_value());
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(s.prompt.shots[k].subject, subject);
      EXPECT_EQ(s.prompt.shots[k].shot_cut, k > 0);
      EXPECT_EQ(extract_attributes(s.shots[k]).characters.count(*subject), 1u);
    }
  }
  const auto again = consistency_suite(config, 20, 3, 9);
  EXPECT_EQ(again[7].prompt, suite[7].prompt);
  EXPECT_EQ(again[7].shots, suite[7].shots);
  EXPECT_THROW(consistency_suite(config, 2, 1, 0), ConfigError);
}

TEST(CrossShotColorStd, MatchesHandComputedPopulationStd) {
  // Two shots: channel std is |a - b| / 2, averaged over channels.
  const Color a(0.2f, 0.4f, 0.9f);
  const Color b(0.6f, 0.4f, 0.5f);
  const double got = cross_shot_color_std(subject_prompt(2, 1), {solid(a, 1, 10), solid(b, 1, 10)});
  EXPECT_NEAR(got, (0.2 + 0.0 + 0.2) / 3.0, 1e-6);
  // Identical shots have zero spread.
  EXPECT_NEAR(cross_shot_color_std(subject_prompt(3, 0), {solid(a, 0, 8), solid(a, 0, 8), solid(a, 0, 8)}), 0.0, 1e-7);
}

TEST(CrossShotColorStd, ShotsWithoutTheSubjectAreSkipped) {
  const Color a(0.1f, 0.1f, 0.1f);
  const Color b(0.3f, 0.3f, 0.3f);
  // Third shot shows the wrong character; only the first two count.
  const double got =
      cross_shot_color_std(subject_prompt(3, 0), {solid(a, 0, 10), solid(b, 0, 10), solid(Color(1, 1, 1), 2, 10)});
  EXPECT_NEAR(got, 0.1, 1e-6);
  EXPECT_TRUE(std::isnan(cross_shot_color_std(subject_prompt(2, 0), {solid(a, 0, 10), solid(b, 0, 2)})));
  EXPECT_THROW(cross_shot_color_std(subject_prompt(2, 0), {solid(a, 0, 10)}), ShapeError);
}

TEST(EvalConsistency, PairsScenesAndIsDeterministic) {
  const auto config = smoke();
  const auto suite = consistency_suite(config.scene, 3, 2, 4);
  const auto a = eval_consistency(random_weights(), config, suite, 2, 5);
  const auto b = eval_consistency(random_weights(), config, suite, 2, 5);
  ASSERT_EQ(a.joint.size(), 3u);
  ASSERT_EQ(a.independent.size(), 3u);
  double j = 0.0, ind = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(std::isnan(a.joint[i]), std::isnan(b.joint[i]));
    if (std::isfinite(a.joint[i]) && std::isfinite(a.independent[i])) {
      j += a.joint[i];
      ind += a.independent[i];
      ++n;
    }
  }
  EXPECT_EQ(a.measured, n);
  if (n > 0) {
    EXPECT_NEAR(a.joint_mean, j / n, 1e-12);
    EXPECT_NEAR(a.independent_mean, ind / n, 1e-12);
  }
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(EvalTcSweep, AggregatesAreConsistentWithPerTrialErrors) {
  const auto config = smoke();
  const std::vector<double> tcs{0.1, 0.5, 0.9};
  const auto r = eval_tc_sweep(random_weights(), config, tcs, 4, 2, 3);
  ASSERT_EQ(r.errors.size(), 3u);
  int paired = 0;
  for (int i = 0; i < 4; ++i) {
    bool all = true;
    for (const auto& e : r.errors) all = all && std::isfinite(e[static_cast<std::size_t>(i)]);
    paired += all ? 1 : 0;
  }
  EXPECT_EQ(r.paired, paired);
  for (std::size_t c = 0; c < tcs.size(); ++c) {
    ASSERT_EQ(r.errors[c].size(), 4u);
    int missing = 0;
    double penalized = 0.0;
    for (double v : r.errors[c]) {
      missing += std::isnan(v) ? 1 : 0;
      penalized += std::isnan(v) ? 1.0 : v;
      if (!std::isnan(v)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.5);
      }
    }
    EXPECT_EQ(r.missing[c], missing);
    EXPECT_NEAR(r.penalized_mean_error[c], penalized / 4.0, 1e-12);
  }
  const auto j = to_json(r);
  EXPECT_EQ(j["suite"], "tc-sweep");
  EXPECT_EQ(j["points"].size(), 3u);
}

TEST(EvalTcSweep, TrialsAreIndependentOfTheOtherTcValues) {
  const auto config = smoke();
  const auto a = eval_tc_sweep(random_weights(), config, {0.2}, 2, 1, 6);
  const auto b = eval_tc_sweep(random_weights(), config, {0.2, 0.7}, 2, 1, 6);
  for (int i = 0; i < 2; ++i) {
    const double x = a.errors[0][static_cast<std::size_t>(i)];
    const double y = b.errors[0][static_cast<std::size_t>(i)];
    if (std::isnan(x)) {
      EXPECT_TRUE(std::isnan(y));
    } else {
      EXPECT_EQ(x, y);
    }
  }
}

TEST(EvalSingleShot, DeterministicAndFinite) {
  const auto config = smoke();
  const double a = eval_single_shot_loss(random_weights(), AttentionMode::kBidirectional, config, 3, 2);
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_GT(a, 0.0);
  EXPECT_EQ(a, eval_single_shot_loss(random_weights(), AttentionMode::kBidirectional, config, 3, 2));
}

TEST(EvalAccumulation, SlopeIsLeastSquaresOverResiduals) {
  const auto config = smoke();
  const auto r = eval_accumulation(random_weights(), config, 4, 0.3, 2, 1, 5);
  ASSERT_EQ(r.residual.size(), 4u);
  double xbar = 1.5, ybar = 0.0;
  for (double v : r.residual) ybar += v / 4.0;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 4; ++k) {
    num += (k - xbar) * (r.residual[static_cast<std::size_t>(k)] - ybar);
    den += (k - xbar) * (k - xbar);
  }
  EXPECT_NEAR(r.slope, num / den, 1e-12);
  for (double v : r.residual) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(to_json(r)["suite"], "accumulation");
}

}  // namespace
}  // namespace lct

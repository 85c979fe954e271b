// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "lct/grad_check.hpp"
#include "lct/rope.hpp"

namespace lct {
namespace {

ShotDescriptor shot(int text_len, int h, int w, int f) {
  ShotDescriptor s;
  s.text_len = text_len;
  s.h_tokens = h;
  s.w_tokens = w;
  s.f_tokens = f;
  return s;
}

TEST(AssignCoords, SingleShotHandExample) {
  SceneLayout layout{{shot(3, 2, 2, 1)}};
  const std::vector<TokenCoord> expected{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}, {3, 4, 3}, {4, 3, 3}, {4, 4, 3}};
  EXPECT_EQ(assign_coords(layout), expected);
}

TEST(AssignCoords, SecondShotOffset) {
  SceneLayout layout{{shot(3, 2, 2, 1), shot(3, 2, 2, 1)}};
  const auto coords = assign_coords(layout);
  ASSERT_EQ(coords.size(), 14u);
  EXPECT_EQ(layout.diagonal_offset(1), 5);
  EXPECT_EQ(coords[7], (TokenCoord{5, 5, 5}));
}

TEST(AssignCoords, MinimalShot) {
  SceneLayout layout{{shot(1, 1, 1, 1)}};
  const std::vector<TokenCoord> expected{{0, 0, 0}, {1, 1, 1}};
  EXPECT_EQ(assign_coords(layout), expected);
}

TEST(AssignCoords, TextTokensSitOnTheDiagonal) {
  SceneLayout layout{{global_group(4), shot(3, 2, 3, 2), shot(2, 1, 1, 4)}};
  const auto coords = assign_coords(layout);
  std::size_t at = 0;
  for (const auto& s : layout.shots) {
    for (int i = 0; i < s.text_len; ++i, ++at) {
      EXPECT_EQ(coords[at].h, coords[at].w);
      EXPECT_EQ(coords[at].w, coords[at].f);
    }
    at += static_cast<std::size_t>(s.video_tokens());
  }
}

TEST(AssignCoords, RandomLayoutsHaveUniqueCoordinates) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> small(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    SceneLayout layout;
    if (trial % 2 == 0) layout.shots.push_back(global_group(small(rng)));
    const int n = small(rng);
    for (int k = 0; k < n; ++k) layout.shots.push_back(shot(small(rng), small(rng), small(rng), small(rng)));
    const auto coords = assign_coords(layout);
    ASSERT_EQ(static_cast<int>(coords.size()), layout.token_count());
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& c : coords) {
      EXPECT_GE(c.h, 0);
      EXPECT_TRUE(seen.emplace(c.h, c.w, c.f).second) << "duplicate coordinate in trial " << trial;
    }
  }
}

TEST(AssignCoords, SingleShotMatchesUnshiftedPlacement) {
  const auto s = shot(5, 3, 2, 4);
  EXPECT_EQ(assign_coords(SceneLayout{{s}}), shot_coords(s, 0));
}

TEST(SceneLayout, ValidationErrors) {
  EXPECT_THROW(SceneLayout{}.validate(), ShapeError);
  EXPECT_THROW((SceneLayout{{shot(0, 1, 1, 1)}}.validate()), ShapeError);
  EXPECT_THROW((SceneLayout{{shot(1, 0, 1, 1)}}.validate()), ShapeError);
  EXPECT_THROW((SceneLayout{{shot(1, 1, 1, 1), global_group(2)}}.validate()), ShapeError);
  auto bad_global = global_group(2);
  bad_global.h_tokens = 2;
  EXPECT_THROW((SceneLayout{{bad_global}}.validate()), ShapeError);
  EXPECT_EQ((SceneLayout{{global_group(16), shot(8, 4, 4, 4)}}.token_count()), 17 + 72);
}

TEST(RopeSplit, RoundsDownToEvenAndRejectsTinyWidths) {
  EXPECT_EQ(RopeSplit(96).axis_dim, 32);
  EXPECT_EQ(RopeSplit(32).axis_dim, 10);
  EXPECT_EQ(RopeSplit(16).axis_dim, 4);
  EXPECT_THROW(RopeSplit(5), ConfigError);
}

Matrix<double> random_features(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

TEST(ApplyRope, ZeroPositionIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor<double> x(random_features(3, 24, rng));
  const std::vector<TokenCoord> coords(3, TokenCoord{0, 0, 0});
  EXPECT_EQ(apply_rope(x, std::span<const TokenCoord>(coords)).value(), x.value());
}

TEST(ApplyRope, PairNormsPreserved) {
  std::mt19937_64 rng(2);
  Tensor<float> x(random_features(4, 32, rng).cast<float>());
  const std::vector<TokenCoord> coords{{3, 9, 1}, {0, 7, 2}, {40, 40, 40}, {5, 0, 11}};
  auto y = apply_rope(x, std::span<const TokenCoord>(coords)).value();
  for (Index r = 0; r < 4; ++r) {
    for (Index c = 0; c < 32; c += 2) {
      const float before = std::hypot(x.value()(r, c), x.value()(r, c + 1));
      const float after = std::hypot(y(r, c), y(r, c + 1));
      EXPECT_NEAR(before, after, 1e-6f * std::max(1.0f, before));
    }
  }
}

TEST(ApplyRope, RemainderChannelsUnrotated) {
  std::mt19937_64 rng(3);
  Tensor<double> x(random_features(1, 32, rng));
  const std::vector<TokenCoord> coords{{5, 6, 7}};
  auto y = apply_rope(x, std::span<const TokenCoord>(coords)).value();
  EXPECT_EQ(y(0, 30), x.value()(0, 30));
  EXPECT_EQ(y(0, 31), x.value()(0, 31));
}

double logit(const Matrix<float>& q, const Matrix<float>& k) { return static_cast<double>(q.row(0).dot(k.row(0))); }

TEST(ApplyRope, LogitDependsOnlyOnOffset) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pos(0, 60);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<float> q(random_features(1, 96, rng).cast<float>());
    Tensor<float> k(random_features(1, 96, rng).cast<float>());
    const TokenCoord p{pos(rng), pos(rng), pos(rng)};
    const TokenCoord delta{pos(rng), pos(rng), pos(rng)};
    const std::vector<TokenCoord> qp{p};
    const std::vector<TokenCoord> kp{{p.h + delta.h, p.w + delta.w, p.f + delta.f}};
    const std::vector<TokenCoord> q0{{0, 0, 0}};
    const std::vector<TokenCoord> k0{delta};
    const double shifted = logit(apply_rope(q, std::span<const TokenCoord>(qp)).value(),
                                 apply_rope(k, std::span<const TokenCoord>(kp)).value());
    const double origin = logit(apply_rope(q, std::span<const TokenCoord>(q0)).value(),
                                apply_rope(k, std::span<const TokenCoord>(k0)).value());
    EXPECT_NEAR(shifted, origin, 1e-4 * std::max(1.0, std::abs(origin)));
  }
}

// Independent 1D RoPE: one frequency list over all rotated pairs, applied at a single position.
Matrix<double> rope_1d_reference(const Matrix<double>& x, int position, const std::vector<double>& freqs) {
  Matrix<double> y = x;
  for (std::size_t j = 0; j < freqs.size(); ++j) {
    const double a = position * freqs[j];
    const Index c = static_cast<Index>(2 * j);
    y(0, c) = x(0, c) * std::cos(a) - x(0, c + 1) * std::sin(a);
    y(0, c + 1) = x(0, c) * std::sin(a) + x(0, c + 1) * std::cos(a);
  }
  return y;
}

TEST(ApplyRope, DiagonalTextTokenEqualsOneDimensionalRope) {
  std::mt19937_64 rng(8);
  const int d = 96;
  std::vector<double> freqs;
  for (int axis = 0; axis < 3; ++axis)
    for (int j = 0; j < 16; ++j) freqs.push_back(std::pow(10000.0, -2.0 * j / 32.0));
  for (int i = 0; i < 64; ++i) {
    Matrix<double> x = random_features(1, d, rng);
    const std::vector<TokenCoord> coords{{i, i, i}};
    auto y = apply_rope(Tensor<double>(x), std::span<const TokenCoord>(coords)).value();
    EXPECT_LE((y - rope_1d_reference(x, i, freqs)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ApplyRope, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const std::vector<TokenCoord> coords{{1, 2, 3}, {4, 4, 4}};
  Tensor<double> probe(random_features(2, 24, rng));
  std::function<Tensor<double>(const Tensor<double>&)> f = [&](const Tensor<double>& x) {
    return sum(mul(apply_rope(x, std::span<const TokenCoord>(coords)), probe));
  };
  auto report = grad_check(f, Tensor<double>(random_features(2, 24, rng)), {1e-5, 1e-3, 1e-8});
  EXPECT_TRUE(report.pass) << report.max_rel_err;
}

TEST(ApplyRope, TokenCountMismatchIsShapeError) {
  const std::vector<TokenCoord> coords{{0, 0, 0}};
  EXPECT_THROW(apply_rope(Tensor<float>::zeros(2, 12), std::span<const TokenCoord>(coords)), ShapeError);
}

}  // namespace
}  // namespace lct

// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/latent.hpp"

#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "lct/errors.hpp"
#include "lct/latent_io.hpp"

namespace lct {
namespace {

ModelConfig patch_config(int ph, int pw, int pf) {
  ModelConfig c;
  c.patch_h = ph;
  c.patch_w = pw;
  c.patch_f = pf;
  return c;
}

Latent random_latent(int c, int h, int w, int f, std::uint64_t seed) {
  Latent z(c, h, w, f);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  for (Index i = 0; i < z.size(); ++i) z.data[i] = n(rng);
  return z;
}

TEST(Latent, StorageOrderIsChannelMajorFramesFastest) {
  Latent z(2, 3, 4, 5);
  EXPECT_EQ(z.index(0, 0, 0, 1), 1);
  EXPECT_EQ(z.index(0, 0, 1, 0), 5);
  EXPECT_EQ(z.index(0, 1, 0, 0), 20);
  EXPECT_EQ(z.index(1, 0, 0, 0), 60);
  EXPECT_EQ(z.size(), 120);
}

TEST(Latent, FrameExtractsOneFrame) {
  const auto z = random_latent(4, 2, 2, 3, 1);
  const auto f1 = z.frame(1);
  EXPECT_EQ(f1.frames, 1);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) EXPECT_EQ(f1.at(c, y, x, 0), z.at(c, y, x, 1));
}

TEST(Patchify, HandExampleTokenAndFeatureOrder) {
  // 1 channel, 2x4 frame, 1 frame, patch 2x2x1: two tokens (w-major within a row of patches).
  Latent z(1, 2, 4, 1);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) z.at(0, y, x, 0) = static_cast<float>(10 * y + x);
  auto config = patch_config(2, 2, 1);
  config.latent_channels = 1;
  const auto tokens = patchify<double>(z, config);
  ASSERT_EQ(tokens.rows(), 2);
  ASSERT_EQ(tokens.cols(), 4);
  // Features ordered (c, dy, dx, df).
  EXPECT_EQ(tokens.row(0), (Eigen::RowVector4d() << 0, 1, 10, 11).finished());
  EXPECT_EQ(tokens.row(1), (Eigen::RowVector4d() << 2, 3, 12, 13).finished());
}

TEST(Patchify, RoundTripsForSeveralPatchSizes) {
  for (const auto& [ph, pw, pf] : {std::tuple{1, 1, 1}, {2, 2, 1}, {2, 1, 2}, {4, 2, 2}}) {
    const auto config = patch_config(ph, pw, pf);
    const auto z = random_latent(4, 8, 4, 4, 7);
    const auto shot = shot_for_latent(z, config, 3);
    EXPECT_EQ(shot.h_tokens, 8 / ph);
    EXPECT_EQ(shot.w_tokens, 4 / pw);
    EXPECT_EQ(shot.f_tokens, 4 / pf);
    const auto tokens = patchify<float>(z, config);
    EXPECT_EQ(tokens.rows(), shot.video_tokens());
    EXPECT_EQ(tokens.cols(), config.patch_dim());
    EXPECT_EQ(unpatchify<float>(tokens, shot, config), z);
  }
}

TEST(Patchify, TokenOrderFollowsHThenWThenF) {
  const auto config = patch_config(2, 2, 1);
  Latent z(4, 4, 4, 2);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int f = 0; f < 2; ++f) z.at(0, y, x, f) = static_cast<float>(100 * (y / 2) + 10 * (x / 2) + f);
  const auto tokens = patchify<float>(z, config);
  // Token (h, w, f) -> row (h * W + w) * F + f, first feature is channel 0, dy = dx = 0.
  for (int h = 0; h < 2; ++h)
    for (int w = 0; w < 2; ++w)
      for (int f = 0; f < 2; ++f) EXPECT_EQ(tokens((h * 2 + w) * 2 + f, 0), 100 * h + 10 * w + f);
}

TEST(Patchify, NonTilingLatentIsShapeError) {
  const auto config = patch_config(2, 2, 1);
  EXPECT_THROW(shot_for_latent(Latent(4, 7, 8, 4), config, 8), ShapeError);
  EXPECT_THROW(shot_for_latent(Latent(3, 8, 8, 4), config, 8), ShapeError);
}

TEST(LatentForShot, InvertsShotForLatent) {
  const auto config = patch_config(2, 2, 1);
  const Latent z(4, 6, 8, 3);
  EXPECT_TRUE(latent_for_shot(shot_for_latent(z, config, 8), config).same_shape(z));
}

TEST(Interpolate, EndpointsAreExact) {
  const auto z0 = random_latent(4, 4, 4, 2, 3);
  const auto eps = random_latent(4, 4, 4, 2, 4);
  EXPECT_EQ(interpolate(z0, eps, 0.0), z0);
  EXPECT_EQ(interpolate(z0, eps, 1.0), eps);
}

TEST(Interpolate, MidpointAndErrors) {
  const auto z0 = random_latent(4, 2, 2, 2, 5);
  const auto eps = random_latent(4, 2, 2, 2, 6);
  const auto mid = interpolate(z0, eps, 0.25);
  for (Index i = 0; i < z0.size(); ++i) EXPECT_NEAR(mid.data[i], 0.75f * z0.data[i] + 0.25f * eps.data[i], 1e-6f);
  EXPECT_THROW(interpolate(z0, eps, -0.1), DomainError);
  EXPECT_THROW(interpolate(z0, eps, 1.5), DomainError);
  EXPECT_THROW(interpolate(z0, Latent(4, 2, 2, 1), 0.5), ShapeError);
}

TEST(LatentIo, RoundTripIsBitwise) {
  const auto z = random_latent(4, 8, 8, 4, 11);
  EXPECT_EQ(deserialize_latent(serialize_latent(z)), z);
}

TEST(LatentIo, CorruptionIsDetected) {
  auto bytes = serialize_latent(random_latent(4, 2, 2, 1, 12));
  auto flipped = bytes;
  flipped[40] ^= 0x10;
  EXPECT_THROW(deserialize_latent(flipped), FormatError);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(deserialize_latent(bytes), FormatError);
}

std::uint32_t le32(const std::vector<char>& b, std::size_t at) {
  std::uint32_t v = 0;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

TEST(Bmp, HeaderAndPixelLayout) {
  Latent z(4, 2, 3, 1);
  // Top-left red, bottom-right blue, everything else black.
  z.at(0, 0, 0, 0) = 1.0f;
  z.at(2, 1, 2, 0) = 1.0f;
  const auto bmp = encode_bmp(z, 0);
  ASSERT_GE(bmp.size(), 54u);
  EXPECT_EQ(bmp[0], 'B');
  EXPECT_EQ(bmp[1], 'M');
  const std::uint32_t row = 12;  // 3 px * 3 bytes = 9, padded to 12
  EXPECT_EQ(le32(bmp, 2), 54 + 2 * row);
  EXPECT_EQ(bmp.size(), 54 + 2 * row);
  EXPECT_EQ(le32(bmp, 18), 3u);
  EXPECT_EQ(le32(bmp, 22), 2u);
  auto px = [&](int x, int y_from_bottom) {
    const std::size_t o = 54 + y_from_bottom * row + 3 * x;
    return std::array<unsigned char, 3>{static_cast<unsigned char>(bmp[o]), static_cast<unsigned char>(bmp[o + 1]),
                                        static_cast<unsigned char>(bmp[o + 2])};
  };
  // BGR order, bottom-up rows.
  EXPECT_EQ(px(0, 1), (std::array<unsigned char, 3>{0, 0, 255}));
  EXPECT_EQ(px(2, 0), (std::array<unsigned char, 3>{255, 0, 0}));
  EXPECT_EQ(px(1, 0), (std::array<unsigned char, 3>{0, 0, 0}));
}

TEST(Bmp, ClampsAndRounds) {
  Latent z(4, 1, 1, 1);
  z.at(0, 0, 0, 0) = 2.0f;
  z.at(1, 0, 0, 0) = -1.0f;
  z.at(2, 0, 0, 0) = 0.5f;
  const auto bmp = encode_bmp(z, 0);
  EXPECT_EQ(static_cast<unsigned char>(bmp[54]), 128);  // round(127.5)
  EXPECT_EQ(static_cast<unsigned char>(bmp[55]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bmp[56]), 255);
}

TEST(Bmp, ScaleReplicatesCellsAndFrameRangeIsChecked) {
  Latent z(4, 2, 2, 2);
  z.at(0, 1, 1, 1) = 1.0f;
  const auto big = encode_bmp(z, 1, 4);
  EXPECT_EQ(le32(big, 18), 8u);
  EXPECT_EQ(le32(big, 22), 8u);
  EXPECT_EQ(encode_bmp(z, 1, 4), big);
  EXPECT_THROW(encode_bmp(z, 2), DomainError);
  EXPECT_THROW(encode_bmp(z, -1), DomainError);
  EXPECT_THROW(encode_bmp(z, 0, 0), DomainError);
}

}  // namespace
}  // namespace lct

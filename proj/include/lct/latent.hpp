// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Shot latents [c x h x w x f] and their patch-token view.
//
// Storage is channel-major: index ((c * H + y) * W + x) * F + f. Patch tokens
// are ordered h-major, then w, then f, matching the video-token order used by
// the rope coordinates; each token's features are ordered (c, dy, dx, df).

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lct/errors.hpp"
#include "lct/mmdit.hpp"
#include "lct/rope.hpp"
#include "lct/tensor.hpp"

namespace lct {

struct Latent {
  int channels = 0;
  int height = 0;
  int width = 0;
  int frames = 0;
  Eigen::VectorXf data;

  Latent() = default;
  Latent(int c, int h, int w, int f) : channels(c), height(h), width(w), frames(f), data(Eigen::VectorXf::Zero(Index(c) * h * w * f)) {}

  Index size() const { return data.size(); }
  Index index(int c, int y, int x, int f) const { return ((Index(c) * height + y) * width + x) * frames + f; }
  float& at(int c, int y, int x, int f) { return data[index(c, y, x, f)]; }
  float at(int c, int y, int x, int f) const { return data[index(c, y, x, f)]; }
  bool same_shape(const Latent& o) const {
    return channels == o.channels && height == o.height && width == o.width && frames == o.frames;
  }
  std::string shape_string() const {
    return "[" + std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width) + "x" +
           std::to_string(frames) + "]";
  }
  // Single frame k as a latent with f = 1.
  Latent frame(int k) const;

  friend bool operator==(const Latent& a, const Latent& b) { return a.same_shape(b) && a.data == b.data; }
};

// Token grid of a latent under the model's patch size; throws ShapeError if
// the latent does not tile evenly.
ShotDescriptor shot_for_latent(const Latent& z, const ModelConfig& config, int text_len);

// Latent dimensions that a shot descriptor's video grid corresponds to.
Latent latent_for_shot(const ShotDescriptor& shot, const ModelConfig& config);

// z_t = (1 - t) z0 + t eps, elementwise. Endpoints are exact.
Latent interpolate(const Latent& z0, const Latent& eps, double t);

template <typename Scalar>
Matrix<Scalar> patchify(const Latent& z, const ModelConfig& config) {
  const auto shot = shot_for_latent(z, config, 1);
  const int ph = config.patch_h, pw = config.patch_w, pf = config.patch_f;
  Matrix<Scalar> tokens(shot.video_tokens(), config.patch_dim());
  Index row = 0;
  for (int th = 0; th < shot.h_tokens; ++th)
    for (int tw = 0; tw < shot.w_tokens; ++tw)
      for (int tf = 0; tf < shot.f_tokens; ++tf, ++row) {
        Index col = 0;
        for (int c = 0; c < z.channels; ++c)
          for (int dy = 0; dy < ph; ++dy)
            for (int dx = 0; dx < pw; ++dx)
              for (int df = 0; df < pf; ++df)
                tokens(row, col++) = static_cast<Scalar>(z.at(c, th * ph + dy, tw * pw + dx, tf * pf + df));
      }
  return tokens;
}

template <typename Scalar>
Latent unpatchify(const Matrix<Scalar>& tokens, const ShotDescriptor& shot, const ModelConfig& config) {
  if (tokens.rows() != shot.video_tokens() || tokens.cols() != config.patch_dim()) {
    throw ShapeError("unpatchify: tokens " + shape_string(tokens.rows(), tokens.cols()) + " do not match grid " +
                     shape_string(shot.video_tokens(), config.patch_dim()));
  }
  Latent z = latent_for_shot(shot, config);
  const int ph = config.patch_h, pw = config.patch_w, pf = config.patch_f;
  Index row = 0;
  for (int th = 0; th < shot.h_tokens; ++th)
    for (int tw = 0; tw < shot.w_tokens; ++tw)
      for (int tf = 0; tf < shot.f_tokens; ++tf, ++row) {
        Index col = 0;
        for (int c = 0; c < z.channels; ++c)
          for (int dy = 0; dy < ph; ++dy)
            for (int dx = 0; dx < pw; ++dx)
              for (int df = 0; df < pf; ++df)
                z.at(c, th * ph + dy, tw * pw + dx, tf * pf + df) = static_cast<float>(tokens(row, col++));
      }
  return z;
}

}  // namespace lct

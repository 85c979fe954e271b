// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/latent.hpp"

namespace lct {

Latent Latent::frame(int k) const {
  if (k < 0 || k >= frames) {
    throw ShapeError("frame " + std::to_string(k) + " out of range for latent " + shape_string());
  }
  Latent out(channels, height, width, 1);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x, 0) = at(c, y, x, k);
  return out;
}

ShotDescriptor shot_for_latent(const Latent& z, const ModelConfig& config, int text_len) {
  if (z.channels != config.latent_channels || z.height <= 0 || z.width <= 0 || z.frames <= 0 ||
      z.height % config.patch_h != 0 || z.width % config.patch_w != 0 || z.frames % config.patch_f != 0) {
    throw ShapeError("latent " + z.shape_string() + " does not tile into " + std::to_string(config.latent_channels) +
                     "-channel patches of " + std::to_string(config.patch_h) + "x" + std::to_string(config.patch_w) +
                     "x" + std::to_string(config.patch_f));
  }
  ShotDescriptor s;
  s.text_len = text_len;
  s.h_tokens = z.height / config.patch_h;
  s.w_tokens = z.width / config.patch_w;
  s.f_tokens = z.frames / config.patch_f;
  return s;
}

Latent latent_for_shot(const ShotDescriptor& shot, const ModelConfig& config) {
  return Latent(config.latent_channels, shot.h_tokens * config.patch_h, shot.w_tokens * config.patch_w,
                shot.f_tokens * config.patch_f);
}

Latent interpolate(const Latent& z0, const Latent& eps, double t) {
  if (!z0.same_shape(eps)) {
    throw ShapeError("interpolate: z0 " + z0.shape_string() + " and eps " + eps.shape_string() + " differ");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolate: t = " + std::to_string(t) + " outside [0, 1]");
  Latent out = z0;
  if (t == 0.0) return out;
  if (t == 1.0) return eps;
  const float a = static_cast<float>(1.0 - t);
  const float b = static_cast<float>(t);
  out.data = a * z0.data + b * eps.data;
  return out;
}

}  // namespace lct

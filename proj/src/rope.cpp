// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/rope.hpp"

#include <algorithm>
#include <string>

namespace lct {

int ShotDescriptor::diagonal_extent() const {
  return text_len + std::max({h_tokens, w_tokens, f_tokens});
}

ShotDescriptor global_group(int text_len) {
  ShotDescriptor shot;
  shot.text_len = text_len;
  shot.is_global_group = true;
  return shot;
}

void SceneLayout::validate() const {
  if (shots.empty()) throw ShapeError("scene layout has no shots");
  for (std::size_t k = 0; k < shots.size(); ++k) {
    const auto& s = shots[k];
    const std::string where = "shot " + std::to_string(k);
    if (s.text_len < 1) throw ShapeError(where + ": text_len must be >= 1");
    if (s.h_tokens < 1 || s.w_tokens < 1 || s.f_tokens < 1) {
      throw ShapeError(where + ": video grid sizes must be >= 1");
    }
    if (s.is_global_group) {
      if (k != 0) throw ShapeError(where + ": the global group must be shot 0");
      if (s.h_tokens != 1 || s.w_tokens != 1 || s.f_tokens != 1) {
        throw ShapeError("global group must use the 1x1x1 dummy video grid");
      }
    }
  }
}

int SceneLayout::token_count() const {
  int n = 0;
  for (const auto& s : shots) n += s.token_count();
  return n;
}

int SceneLayout::text_token_count() const {
  int n = 0;
  for (const auto& s : shots) n += s.text_len;
  return n;
}

int SceneLayout::video_token_count() const {
  int n = 0;
  for (const auto& s : shots) n += s.video_tokens();
  return n;
}

int SceneLayout::diagonal_offset(int k) const {
  int offset = 0;
  for (int i = 0; i < k; ++i) offset += shots[static_cast<std::size_t>(i)].diagonal_extent();
  return offset;
}

std::vector<TokenCoord> shot_coords(const ShotDescriptor& shot, int offset) {
  std::vector<TokenCoord> coords;
  coords.reserve(static_cast<std::size_t>(shot.token_count()));
  for (int i = 0; i < shot.text_len; ++i) coords.push_back({offset + i, offset + i, offset + i});
  const int v0 = offset + shot.text_len;
  for (int h = 0; h < shot.h_tokens; ++h) {
    for (int w = 0; w < shot.w_tokens; ++w) {
      for (int f = 0; f < shot.f_tokens; ++f) coords.push_back({v0 + h, v0 + w, v0 + f});
    }
  }
  return coords;
}

std::vector<TokenCoord> assign_coords(const SceneLayout& layout) {
  layout.validate();
  std::vector<TokenCoord> coords;
  coords.reserve(static_cast<std::size_t>(layout.token_count()));
  int offset = 0;
  for (const auto& shot : layout.shots) {
    auto part = shot_coords(shot, offset);
    coords.insert(coords.end(), part.begin(), part.end());
    offset += shot.diagonal_extent();
  }
  return coords;
}

RopeSplit::RopeSplit(int feature_width) : width(feature_width), axis_dim((feature_width / 3) & ~1) {
  if (axis_dim < 2) {
    throw ConfigError("rotary width " + std::to_string(feature_width) +
                      " is too small for a 3-axis split (need at least 6 channels)");
  }
}

}  // namespace lct

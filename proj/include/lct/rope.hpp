// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Scene token geometry and interleaved 3D rotary position embedding.
//
// Each shot contributes its text tokens followed by its video tokens. Text
// token i of a shot starting at diagonal offset D sits at (D+i, D+i, D+i);
// video token (h, w, f) sits at (D+L+h, D+L+w, D+L+f) with L the text length.
// The next shot starts at D + L + max(h_tokens, w_tokens, f_tokens), so shots
// never overlap on any axis and a one-shot scene keeps offset zero.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lct/tensor.hpp"

namespace lct {

struct TokenCoord {
  int h = 0;
  int w = 0;
  int f = 0;

  friend bool operator==(const TokenCoord&, const TokenCoord&) = default;
};

struct ShotDescriptor {
  int text_len = 1;
  int h_tokens = 1;
  int w_tokens = 1;
  int f_tokens = 1;
  bool is_global_group = false;
  bool shot_cut = false;

  int video_tokens() const { return h_tokens * w_tokens * f_tokens; }
  int token_count() const { return text_len + video_tokens(); }
  int diagonal_extent() const;

  friend bool operator==(const ShotDescriptor&, const ShotDescriptor&) = default;
};

// The global prompt group: text plus a single zero-valued dummy video token.
ShotDescriptor global_group(int text_len);

struct SceneLayout {
  std::vector<ShotDescriptor> shots;

  // Throws ShapeError on an invalid layout.
  void validate() const;
  bool has_global_group() const { return !shots.empty() && shots.front().is_global_group; }
  int shot_count() const { return static_cast<int>(shots.size()); }
  int token_count() const;
  int text_token_count() const;
  int video_token_count() const;
  // Diagonal offset at which shot k starts; k == shot_count() gives the next free offset.
  int diagonal_offset(int k) const;

  friend bool operator==(const SceneLayout&, const SceneLayout&) = default;
};

// One coordinate per token in scene order (shot by shot, text before video).
std::vector<TokenCoord> assign_coords(const SceneLayout& layout);

// Coordinates of a single shot placed at diagonal offset `offset`.
std::vector<TokenCoord> shot_coords(const ShotDescriptor& shot, int offset);

// Channel split for a rotary feature width: three equal even groups (h, w, f)
// followed by unrotated remainder channels.
struct RopeSplit {
  int width = 0;
  int axis_dim = 0;

  explicit RopeSplit(int feature_width);
  int pairs_per_axis() const { return axis_dim / 2; }
  int rotated() const { return 3 * axis_dim; }
};

// Per-token cos/sin tables for one feature width, reused across heads and blocks.
template <typename Scalar>
struct RopeTable {
  RopeSplit split{6};
  Matrix<Scalar> cos;  // tokens x (3 * pairs_per_axis)
  Matrix<Scalar> sin;

  Index tokens() const { return cos.rows(); }
};

template <typename Scalar>
RopeTable<Scalar> make_rope_table(std::span<const TokenCoord> coords, int feature_width,
                                  double base = 10000.0) {
  RopeTable<Scalar> table{RopeSplit(feature_width), {}, {}};
  const int pairs = table.split.pairs_per_axis();
  const auto n = static_cast<Index>(coords.size());
  table.cos.resize(n, 3 * pairs);
  table.sin.resize(n, 3 * pairs);
  for (Index t = 0; t < n; ++t) {
    const int axis_pos[3] = {coords[t].h, coords[t].w, coords[t].f};
    for (int axis = 0; axis < 3; ++axis) {
      for (int j = 0; j < pairs; ++j) {
        const double theta = std::pow(base, -2.0 * j / table.split.axis_dim);
        const double angle = axis_pos[axis] * theta;
        table.cos(t, axis * pairs + j) = static_cast<Scalar>(std::cos(angle));
        table.sin(t, axis * pairs + j) = static_cast<Scalar>(std::sin(angle));
      }
    }
  }
  return table;
}

namespace detail {

// Rotates each width-sized column block of x (one block per attention head).
template <typename Scalar>
Matrix<Scalar> rotate_blocks(const Matrix<Scalar>& x, const RopeTable<Scalar>& table, bool inverse) {
  const int width = table.split.width;
  const int pairs = table.split.pairs_per_axis();
  Matrix<Scalar> y = x;
  const Index blocks = x.cols() / width;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index b = 0; b < blocks; ++b) {
      const Index base_col = b * width;
      for (int axis = 0; axis < 3; ++axis) {
        for (int j = 0; j < pairs; ++j) {
          const Index c0 = base_col + axis * table.split.axis_dim + 2 * j;
          const Scalar c = table.cos(r, axis * pairs + j);
          const Scalar s = inverse ? -table.sin(r, axis * pairs + j) : table.sin(r, axis * pairs + j);
          const Scalar x0 = x(r, c0);
          const Scalar x1 = x(r, c0 + 1);
          y(r, c0) = x0 * c - x1 * s;
          y(r, c0 + 1) = x0 * s + x1 * c;
        }
      }
    }
  }
  return y;
}

}  // namespace detail

// Applies the rotary embedding to every width-sized column block of features
// (width = table.split.width); features has one row per table token.
template <typename Scalar>
Tensor<Scalar> apply_rope(const Tensor<Scalar>& features, const RopeTable<Scalar>& table) {
  if (features.rows() != table.tokens()) {
    throw ShapeError("apply_rope: " + std::to_string(features.rows()) + " tokens but " +
                     std::to_string(table.tokens()) + " coordinates");
  }
  if (features.cols() % table.split.width != 0) {
    throw ShapeError("apply_rope: feature width " + std::to_string(features.cols()) +
                     " is not a multiple of the rotary width " + std::to_string(table.split.width));
  }
  auto xn = features.node();
  return detail::make_result<Scalar>(detail::rotate_blocks(features.value(), table, false), {features},
                                     [xn, table](const Matrix<Scalar>& g) {
                                       xn->accumulate(detail::rotate_blocks(g, table, true));
                                     });
}

template <typename Scalar>
Tensor<Scalar> apply_rope(const Tensor<Scalar>& features, std::span<const TokenCoord> coords,
                          double base = 10000.0) {
  return apply_rope(features, make_rope_table<Scalar>(coords, static_cast<int>(features.cols()), base));
}

}  // namespace lct

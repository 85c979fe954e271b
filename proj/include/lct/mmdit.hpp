// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Long-context MMDiT: modality-split transformer blocks that attend jointly
// over every text and video token of a scene, with per-shot timestep
// modulation and switchable bidirectional / context-causal masking.
//
// Inside a forward pass tokens are kept in "joint order": all text rows of the
// scene (shot by shot) followed by all video rows (shot by shot). Positions
// come from the interleaved 3D coordinates, so the ordering of rows only
// affects floating-point summation order, never the model function.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "lct/errors.hpp"
#include "lct/rope.hpp"
#include "lct/tensor.hpp"

namespace lct {

enum class AttentionMode { kBidirectional, kContextCausal };

std::string to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view text);

struct ModelConfig {
  int d_model = 128;
  int heads = 4;
  int blocks = 4;
  int latent_channels = 4;
  int patch_h = 2;
  int patch_w = 2;
  int patch_f = 1;
  int vocab_size = 64;
  int mlp_ratio = 4;
  int freq_dim = 64;
  double rope_base = 10000.0;

  int head_dim() const { return d_model / heads; }
  int patch_dim() const { return latent_channels * patch_h * patch_w * patch_f; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct StreamWeights {
  Tensor<Scalar> mod_w, mod_b;  // d -> 6d: shift/scale/gate for attention, then MLP
  Tensor<Scalar> qkv_w, qkv_b;
  Tensor<Scalar> out_w, out_b;
  Tensor<Scalar> mlp_in_w, mlp_in_b;
  Tensor<Scalar> mlp_out_w, mlp_out_b;
};

// Text and video streams carry separate parameters of identical shapes.
template <typename Scalar>
struct BlockWeights {
  StreamWeights<Scalar> text;
  StreamWeights<Scalar> video;
};

template <typename Scalar>
struct ModelWeights {
  ModelConfig config;
  Tensor<Scalar> token_embed;
  Tensor<Scalar> patch_w, patch_b;
  Tensor<Scalar> time_w1, time_b1, time_w2, time_b2;
  std::vector<BlockWeights<Scalar>> blocks;
  Tensor<Scalar> final_mod_w, final_mod_b;
  Tensor<Scalar> head_w, head_b;

  // Named handles sharing storage with this model, in a stable order.
  std::vector<std::pair<std::string, Tensor<Scalar>>> parameters() const;

  ModelWeights clone() const { return cast<Scalar>(); }

  template <typename Other>
  ModelWeights<Other> cast() const;
};

enum class InitScheme {
  // Modulation and output head start at zero so every block is the identity.
  kAdaLnZero,
  // Every tensor random; used for gradient checks so no path is trivially zero.
  kRandom,
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> xavier(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix<Scalar> m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return Tensor<Scalar>(std::move(m), true);
}

template <typename Scalar>
Tensor<Scalar> normal(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return Tensor<Scalar>(std::move(m), true);
}

template <typename Scalar>
Tensor<Scalar> zero_or_normal(Index rows, Index cols, bool random, double stddev, std::mt19937_64& rng) {
  if (random) return normal<Scalar>(rows, cols, stddev, rng);
  return Tensor<Scalar>::zeros(rows, cols, true);
}

}  // namespace detail

template <typename Scalar>
ModelWeights<Scalar> init_model(const ModelConfig& config, std::uint64_t seed,
                                InitScheme scheme = InitScheme::kAdaLnZero) {
  config.validate();
  std::mt19937_64 rng(seed);
  const bool random = scheme == InitScheme::kRandom;
  const Index d = config.d_model;
  const Index hidden = d * config.mlp_ratio;
  ModelWeights<Scalar> w;
  w.config = config;
  w.token_embed = detail::normal<Scalar>(config.vocab_size, d, 1.0, rng);
  w.patch_w = detail::xavier<Scalar>(config.patch_dim(), d, rng);
  w.patch_b = detail::zero_or_normal<Scalar>(1, d, random, 0.05, rng);
  w.time_w1 = detail::xavier<Scalar>(config.freq_dim, d, rng);
  w.time_b1 = detail::zero_or_normal<Scalar>(1, d, random, 0.05, rng);
  w.time_w2 = detail::xavier<Scalar>(d, d, rng);
  w.time_b2 = detail::zero_or_normal<Scalar>(1, d, random, 0.05, rng);
  auto stream = [&]() {
    StreamWeights<Scalar> s;
    s.mod_w = random ? detail::xavier<Scalar>(d, 6 * d, rng) : Tensor<Scalar>::zeros(d, 6 * d, true);
    s.mod_b = detail::zero_or_normal<Scalar>(1, 6 * d, random, 0.2, rng);
    s.qkv_w = detail::xavier<Scalar>(d, 3 * d, rng);
    s.qkv_b = detail::zero_or_normal<Scalar>(1, 3 * d, random, 0.05, rng);
    s.out_w = detail::xavier<Scalar>(d, d, rng);
    s.out_b = detail::zero_or_normal<Scalar>(1, d, random, 0.05, rng);
    s.mlp_in_w = detail::xavier<Scalar>(d, hidden, rng);
    s.mlp_in_b = detail::zero_or_normal<Scalar>(1, hidden, random, 0.05, rng);
    s.mlp_out_w = detail::xavier<Scalar>(hidden, d, rng);
    s.mlp_out_b = detail::zero_or_normal<Scalar>(1, d, random, 0.05, rng);
    return s;
  };
  for (int b = 0; b < config.blocks; ++b) {
    BlockWeights<Scalar> block;
    block.text = stream();
    block.video = stream();
    w.blocks.push_back(std::move(block));
  }
  w.final_mod_w = random ? detail::xavier<Scalar>(d, 2 * d, rng) : Tensor<Scalar>::zeros(d, 2 * d, true);
  w.final_mod_b = detail::zero_or_normal<Scalar>(1, 2 * d, random, 0.2, rng);
  w.head_w = random ? detail::xavier<Scalar>(d, config.patch_dim(), rng)
                    : Tensor<Scalar>::zeros(d, config.patch_dim(), true);
  w.head_b = detail::zero_or_normal<Scalar>(1, config.patch_dim(), random, 0.05, rng);
  return w;
}

template <typename Scalar>
std::vector<std::pair<std::string, Tensor<Scalar>>> ModelWeights<Scalar>::parameters() const {
  std::vector<std::pair<std::string, Tensor<Scalar>>> out{
      {"token_embed", token_embed}, {"patch_w", patch_w}, {"patch_b", patch_b},
      {"time_w1", time_w1},         {"time_b1", time_b1}, {"time_w2", time_w2},
      {"time_b2", time_b2},
  };
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (const auto& [stream_name, s] : {std::pair{"text", &blocks[b].text}, std::pair{"video", &blocks[b].video}}) {
      const std::string prefix = "blocks." + std::to_string(b) + "." + stream_name + ".";
      out.emplace_back(prefix + "mod_w", s->mod_w);
      out.emplace_back(prefix + "mod_b", s->mod_b);
      out.emplace_back(prefix + "qkv_w", s->qkv_w);
      out.emplace_back(prefix + "qkv_b", s->qkv_b);
      out.emplace_back(prefix + "out_w", s->out_w);
      out.emplace_back(prefix + "out_b", s->out_b);
      out.emplace_back(prefix + "mlp_in_w", s->mlp_in_w);
      out.emplace_back(prefix + "mlp_in_b", s->mlp_in_b);
      out.emplace_back(prefix + "mlp_out_w", s->mlp_out_w);
      out.emplace_back(prefix + "mlp_out_b", s->mlp_out_b);
    }
  }
  out.emplace_back("final_mod_w", final_mod_w);
  out.emplace_back("final_mod_b", final_mod_b);
  out.emplace_back("head_w", head_w);
  out.emplace_back("head_b", head_b);
  return out;
}

template <typename Scalar>
template <typename Other>
ModelWeights<Other> ModelWeights<Scalar>::cast() const {
  auto conv = [](const Tensor<Scalar>& t) {
    return Tensor<Other>(t.value().template cast<Other>(), t.requires_grad());
  };
  auto conv_stream = [&](const StreamWeights<Scalar>& s) {
    return StreamWeights<Other>{conv(s.mod_w),    conv(s.mod_b),    conv(s.qkv_w),     conv(s.qkv_b),
                                conv(s.out_w),    conv(s.out_b),    conv(s.mlp_in_w),  conv(s.mlp_in_b),
                                conv(s.mlp_out_w), conv(s.mlp_out_b)};
  };
  ModelWeights<Other> w;
  w.config = config;
  w.token_embed = conv(token_embed);
  w.patch_w = conv(patch_w);
  w.patch_b = conv(patch_b);
  w.time_w1 = conv(time_w1);
  w.time_b1 = conv(time_b1);
  w.time_w2 = conv(time_w2);
  w.time_b2 = conv(time_b2);
  for (const auto& b : blocks) w.blocks.push_back({conv_stream(b.text), conv_stream(b.video)});
  w.final_mod_w = conv(final_mod_w);
  w.final_mod_b = conv(final_mod_b);
  w.head_w = conv(head_w);
  w.head_b = conv(head_b);
  return w;
}

// Boolean attention permissions in scene order; true means the row token may attend the column token.
struct AttentionMask {
  AttentionMode mode = AttentionMode::kBidirectional;
  Index size = 0;
  std::vector<std::uint8_t> allowed;

  bool at(Index row, Index col) const { return allowed[static_cast<std::size_t>(row * size + col)] != 0; }
  bool all_allowed() const;
};

// Shot index of every token in scene order.
std::vector<int> token_shot_index(const SceneLayout& layout);

// Context-causal: a token of shot a may attend a token of shot b iff b <= a.
// The global group is shot 0, so it is visible to every shot and sees only itself.
AttentionMask build_mask(const SceneLayout& layout, AttentionMode mode);

namespace detail {

// Additive bias (0 or -inf) in joint order; empty when every pair is allowed.
template <typename Scalar>
Matrix<Scalar> joint_bias(const std::vector<int>& joint_shot, AttentionMode mode) {
  if (mode == AttentionMode::kBidirectional) return {};
  const auto n = static_cast<Index>(joint_shot.size());
  bool any_blocked = false;
  Matrix<Scalar> bias = Matrix<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (joint_shot[static_cast<std::size_t>(j)] > joint_shot[static_cast<std::size_t>(i)]) {
        bias(i, j) = -std::numeric_limits<Scalar>::infinity();
        any_blocked = true;
      }
    }
  }
  if (!any_blocked) return {};
  return bias;
}

}  // namespace detail

// Sinusoidal features of t * 1000, one row per entry.
template <typename Scalar>
Matrix<Scalar> timestep_features(std::span<const double> t, int freq_dim) {
  const int half = freq_dim / 2;
  Matrix<Scalar> m(static_cast<Index>(t.size()), freq_dim);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= 0.0 && t[i] <= 1.0)) {
      throw DomainError("timestep " + std::to_string(t[i]) + " outside [0, 1]");
    }
    const double scaled = t[i] * 1000.0;
    for (int j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(10000.0) * j / half);
      m(static_cast<Index>(i), j) = static_cast<Scalar>(std::cos(scaled * freq));
      m(static_cast<Index>(i), half + j) = static_cast<Scalar>(std::sin(scaled * freq));
    }
  }
  return m;
}

// Per-shot conditioning vectors: sinusoidal features followed by a 2-layer MLP.
template <typename Scalar>
Tensor<Scalar> timestep_embed(const ModelWeights<Scalar>& w, std::span<const double> t_per_shot) {
  Tensor<Scalar> feats(timestep_features<Scalar>(t_per_shot, w.config.freq_dim));
  return linear(silu(linear(feats, w.time_w1, w.time_b1)), w.time_w2, w.time_b2);
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> modulate(const Tensor<Scalar>& x, const Tensor<Scalar>& shift, const Tensor<Scalar>& scale_by) {
  return add(mul(x, add_scalar(scale_by, Scalar(1))), shift);
}

template <typename Scalar>
Tensor<Scalar> chunk(const Tensor<Scalar>& mod, int index, Index d) {
  return slice_cols(mod, index * d, d);
}

// Multi-head softmax attention; bias (Nq x Nk) may be null.
template <typename Scalar>
Tensor<Scalar> attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v, int heads,
                         const Matrix<Scalar>* bias) {
  const Index hd = q.cols() / heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));
  std::vector<Tensor<Scalar>> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * hd, hd);
    auto kh = slice_cols(k, h * hd, hd);
    auto vh = slice_cols(v, h * hd, hd);
    auto logits = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (bias != nullptr) logits = add_constant(logits, *bias);
    outs.push_back(matmul(softmax(logits, 1), vh));
  }
  return concat_cols(outs);
}

}  // namespace detail

// Result of one block: updated token streams plus the rotated keys and values
// of the tokens processed (what a KV cache stores).
template <typename Scalar>
struct BlockOutput {
  Tensor<Scalar> text;
  Tensor<Scalar> video;
  Tensor<Scalar> keys;
  Tensor<Scalar> values;
};

// One MMDiT block over joint-order tokens.
//   text_mod / video_mod: modulation vectors, either one row per token or a
//     single row broadcast to every token of the stream (6 * d_model wide).
//   rope: rotary table for the rows [text; video].
//   bias: additive mask in joint order (null = attend everything).
//   prefix_keys / prefix_values: cached rotated K/V prepended to this block's
//     keys (null for a full forward).
template <typename Scalar>
BlockOutput<Scalar> block_forward(const BlockWeights<Scalar>& w, const Tensor<Scalar>& text,
                                  const Tensor<Scalar>& video, const Tensor<Scalar>& text_mod,
                                  const Tensor<Scalar>& video_mod, const RopeTable<Scalar>& rope,
                                  std::type_identity_t<const Matrix<Scalar>*> bias, int heads,
                                  std::type_identity_t<const Matrix<Scalar>*> prefix_keys = nullptr,
                                  std::type_identity_t<const Matrix<Scalar>*> prefix_values = nullptr) {
  const Index d = text.cols();
  if (video.cols() != d) throw ShapeError("block_forward: text and video widths differ");
  if (text.rows() + video.rows() != rope.tokens()) {
    throw ShapeError("block_forward: " + std::to_string(text.rows() + video.rows()) + " tokens but " +
                     std::to_string(rope.tokens()) + " coordinates");
  }
  using detail::chunk;

  auto project = [&](const StreamWeights<Scalar>& s, const Tensor<Scalar>& x, const Tensor<Scalar>& mod) {
    auto xn = detail::modulate(rms_norm(x), chunk(mod, 0, d), chunk(mod, 1, d));
    return linear(xn, s.qkv_w, s.qkv_b);
  };
  auto qkv = concat_rows<Scalar>({project(w.text, text, text_mod), project(w.video, video, video_mod)});
  auto q = apply_rope(slice_cols(qkv, 0, d), rope);
  auto k = apply_rope(slice_cols(qkv, d, d), rope);
  auto v = slice_cols(qkv, 2 * d, d);

  Tensor<Scalar> k_all = k;
  Tensor<Scalar> v_all = v;
  if (prefix_keys != nullptr && prefix_keys->rows() > 0) {
    k_all = concat_rows<Scalar>({Tensor<Scalar>(*prefix_keys), k});
    v_all = concat_rows<Scalar>({Tensor<Scalar>(*prefix_values), v});
  }
  if (bias != nullptr && (bias->rows() != q.rows() || bias->cols() != k_all.rows())) {
    throw ShapeError("block_forward: mask " + shape_string(bias->rows(), bias->cols()) + " for " +
                     std::to_string(q.rows()) + " queries and " + std::to_string(k_all.rows()) + " keys");
  }
  auto attn = detail::attention(q, k_all, v_all, heads, bias);

  auto finish = [&](const StreamWeights<Scalar>& s, const Tensor<Scalar>& x, const Tensor<Scalar>& mod,
                    const Tensor<Scalar>& a) {
    auto h = add(x, mul(chunk(mod, 2, d), linear(a, s.out_w, s.out_b)));
    auto hn = detail::modulate(rms_norm(h), chunk(mod, 3, d), chunk(mod, 4, d));
    auto mlp = linear(gelu(linear(hn, s.mlp_in_w, s.mlp_in_b)), s.mlp_out_w, s.mlp_out_b);
    return add(h, mul(chunk(mod, 5, d), mlp));
  };
  const Index nt = text.rows();
  BlockOutput<Scalar> out;
  out.text = finish(w.text, text, text_mod, slice_rows(attn, 0, nt));
  out.video = finish(w.video, video, video_mod, slice_rows(attn, nt, video.rows()));
  out.keys = k;
  out.values = v;
  return out;
}

// Inputs for one scene. t_shots and prompt_ids include the global group (if
// any); video_tokens holds patchified latents, one row per video token. The
// coords override (scene order) exists for plumbing tests; empty means the
// interleaved layout.
template <typename Scalar>
struct SceneInput {
  SceneLayout layout;
  std::vector<std::vector<int>> prompt_ids;
  std::vector<Matrix<Scalar>> video_tokens;
  std::vector<double> t_shots;
  std::vector<TokenCoord> coords;

  void validate(const ModelConfig& config) const;
};

template <typename Scalar>
void SceneInput<Scalar>::validate(const ModelConfig& config) const {
  layout.validate();
  const auto n = layout.shots.size();
  if (prompt_ids.size() != n || video_tokens.size() != n || t_shots.size() != n) {
    throw ShapeError("scene input: per-shot lists must have one entry per layout shot (" + std::to_string(n) + ")");
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = layout.shots[k];
    if (static_cast<int>(prompt_ids[k].size()) != s.text_len) {
      throw ShapeError("scene input: shot " + std::to_string(k) + " has " + std::to_string(prompt_ids[k].size()) +
                       " prompt tokens, layout says " + std::to_string(s.text_len));
    }
    if (video_tokens[k].rows() != s.video_tokens() || video_tokens[k].cols() != config.patch_dim()) {
      throw ShapeError("scene input: shot " + std::to_string(k) + " video tokens " +
                       shape_string(video_tokens[k].rows(), video_tokens[k].cols()) + ", expected " +
                       shape_string(s.video_tokens(), config.patch_dim()));
    }
  }
  if (!coords.empty() && static_cast<int>(coords.size()) != layout.token_count()) {
    throw ShapeError("scene input: coords override has wrong length");
  }
}

namespace detail {

// Splits scene-order coordinates into joint order [text; video].
inline std::vector<TokenCoord> joint_coords(const SceneLayout& layout, const std::vector<TokenCoord>& scene) {
  std::vector<TokenCoord> text;
  std::vector<TokenCoord> video;
  std::size_t at = 0;
  for (const auto& s : layout.shots) {
    for (int i = 0; i < s.text_len; ++i) text.push_back(scene[at++]);
    for (int i = 0; i < s.video_tokens(); ++i) video.push_back(scene[at++]);
  }
  text.insert(text.end(), video.begin(), video.end());
  return text;
}

template <typename Scalar>
Tensor<Scalar> final_layer(const ModelWeights<Scalar>& w, const Tensor<Scalar>& video, const Tensor<Scalar>& mod) {
  const Index d = w.config.d_model;
  auto xn = modulate(rms_norm(video), chunk(mod, 0, d), chunk(mod, 1, d));
  return linear(xn, w.head_w, w.head_b);
}

}  // namespace detail

// Velocity prediction for every non-global shot, in patch-token space
// ([video_tokens x patch_dim] per shot).
template <typename Scalar>
std::vector<Tensor<Scalar>> forward(const ModelWeights<Scalar>& w, const SceneInput<Scalar>& input,
                                    AttentionMode mode) {
  input.validate(w.config);
  const auto& layout = input.layout;
  const Index d = w.config.d_model;

  std::vector<int> ids;
  std::vector<int> text_shot;
  std::vector<int> video_shot;
  Matrix<Scalar> patches(layout.video_token_count(), w.config.patch_dim());
  Index row = 0;
  for (std::size_t k = 0; k < layout.shots.size(); ++k) {
    ids.insert(ids.end(), input.prompt_ids[k].begin(), input.prompt_ids[k].end());
    text_shot.insert(text_shot.end(), static_cast<std::size_t>(layout.shots[k].text_len), static_cast<int>(k));
    const Index nv = layout.shots[k].video_tokens();
    video_shot.insert(video_shot.end(), static_cast<std::size_t>(nv), static_cast<int>(k));
    patches.middleRows(row, nv) = input.video_tokens[k];
    row += nv;
  }

  Tensor<Scalar> text = gather_rows(w.token_embed, std::span<const int>(ids));
  Tensor<Scalar> video = linear(Tensor<Scalar>(std::move(patches)), w.patch_w, w.patch_b);
  auto temb = silu(timestep_embed(w, std::span<const double>(input.t_shots)));

  const auto scene_coords = input.coords.empty() ? assign_coords(layout) : input.coords;
  const auto rope = make_rope_table<Scalar>(detail::joint_coords(layout, scene_coords), w.config.head_dim(),
                                            w.config.rope_base);
  std::vector<int> joint_shot = text_shot;
  joint_shot.insert(joint_shot.end(), video_shot.begin(), video_shot.end());
  const Matrix<Scalar> bias = detail::joint_bias<Scalar>(joint_shot, mode);
  const Matrix<Scalar>* bias_ptr = bias.size() == 0 ? nullptr : &bias;

  for (const auto& block : w.blocks) {
    auto text_mod = gather_rows(linear(temb, block.text.mod_w, block.text.mod_b), std::span<const int>(text_shot));
    auto video_mod = gather_rows(linear(temb, block.video.mod_w, block.video.mod_b), std::span<const int>(video_shot));
    auto out = block_forward(block, text, video, text_mod, video_mod, rope, bias_ptr, w.config.heads);
    text = out.text;
    video = out.video;
  }
  auto final_mod = gather_rows(linear(temb, w.final_mod_w, w.final_mod_b), std::span<const int>(video_shot));
  auto velocity = detail::final_layer(w, video, final_mod);

  std::vector<Tensor<Scalar>> per_shot;
  Index at = 0;
  for (const auto& s : layout.shots) {
    const Index nv = s.video_tokens();
    if (!s.is_global_group) per_shot.push_back(slice_rows(velocity, at, nv));
    at += nv;
  }
  (void)d;
  return per_shot;
}

// Reference path for a lone shot: no scene bookkeeping, no mask, modulation
// broadcast from a single timestep row, coordinates at offset zero.
template <typename Scalar>
Tensor<Scalar> single_shot_forward(const ModelWeights<Scalar>& w, const ShotDescriptor& shot,
                                   std::span<const int> prompt_ids, const Matrix<Scalar>& video_tokens, double t) {
  if (static_cast<int>(prompt_ids.size()) != shot.text_len || video_tokens.rows() != shot.video_tokens() ||
      video_tokens.cols() != w.config.patch_dim()) {
    throw ShapeError("single_shot_forward: inputs do not match the shot descriptor");
  }
  Tensor<Scalar> text = gather_rows(w.token_embed, prompt_ids);
  Tensor<Scalar> video = linear(Tensor<Scalar>(video_tokens), w.patch_w, w.patch_b);
  const double ts[1] = {t};
  auto temb = silu(timestep_embed(w, std::span<const double>(ts, 1)));
  const auto coords = shot_coords(shot, 0);
  const auto rope = make_rope_table<Scalar>(coords, w.config.head_dim(), w.config.rope_base);
  for (const auto& block : w.blocks) {
    auto out = block_forward(block, text, video, linear(temb, block.text.mod_w, block.text.mod_b),
                             linear(temb, block.video.mod_w, block.video.mod_b), rope, nullptr, w.config.heads);
    text = out.text;
    video = out.video;
  }
  return detail::final_layer(w, video, linear(temb, w.final_mod_w, w.final_mod_b));
}

// Rotated keys and values of one shot, per block, in [text; video] row order.
template <typename Scalar>
struct ShotKV {
  ShotDescriptor shot;
  std::vector<Matrix<Scalar>> keys;
  std::vector<Matrix<Scalar>> values;
};

// Append-only per-session store of K/V for already processed shots.
template <typename Scalar>
class KVCache {
 public:
  KVCache() = default;
  explicit KVCache(const ModelConfig& config)
      : config_(config), keys_(static_cast<std::size_t>(config.blocks)), values_(static_cast<std::size_t>(config.blocks)) {
    for (auto& k : keys_) k.resize(0, config.d_model);
    for (auto& v : values_) v.resize(0, config.d_model);
  }

  const ModelConfig& config() const { return config_; }
  const SceneLayout& layout() const { return layout_; }
  int shot_count() const { return layout_.shot_count(); }
  Index cached_tokens() const { return keys_.empty() ? 0 : keys_.front().rows(); }
  const Matrix<Scalar>& keys(int block) const { return keys_.at(static_cast<std::size_t>(block)); }
  const Matrix<Scalar>& values(int block) const { return values_.at(static_cast<std::size_t>(block)); }
  int next_offset() const { return layout_.diagonal_offset(layout_.shot_count()); }

  void append(const ShotKV<Scalar>& kv) {
    check_shot(kv.shot);
    if (kv.keys.size() != keys_.size() || kv.values.size() != values_.size()) {
      throw SessionError("KV cache: entry has " + std::to_string(kv.keys.size()) + " blocks, cache has " +
                         std::to_string(keys_.size()));
    }
    for (std::size_t b = 0; b < keys_.size(); ++b) {
      if (kv.keys[b].rows() != kv.shot.token_count() || kv.keys[b].cols() != config_.d_model ||
          kv.values[b].rows() != kv.shot.token_count() || kv.values[b].cols() != config_.d_model) {
        throw SessionError("KV cache: entry geometry does not match the model");
      }
      append_rows(keys_[b], kv.keys[b]);
      append_rows(values_[b], kv.values[b]);
    }
    layout_.shots.push_back(kv.shot);
  }

  // Throws SessionError if `shot` cannot be appended next.
  void check_shot(const ShotDescriptor& shot) const {
    if (keys_.empty()) throw SessionError("KV cache was not initialised with a model config");
    if (shot.is_global_group && layout_.shot_count() > 0) {
      throw SessionError("KV cache: the global group must be the first cached shot");
    }
  }

 private:
  static void append_rows(Matrix<Scalar>& dst, const Matrix<Scalar>& src) {
    const Index old = dst.rows();
    dst.conservativeResize(old + src.rows(), Eigen::NoChange);
    dst.bottomRows(src.rows()) = src;
  }

  ModelConfig config_;
  SceneLayout layout_;
  std::vector<Matrix<Scalar>> keys_;
  std::vector<Matrix<Scalar>> values_;
};

template <typename Scalar>
struct ShotInput {
  ShotDescriptor shot;
  std::vector<int> prompt_ids;
  Matrix<Scalar> video_tokens;
  double t = 0.0;
};

template <typename Scalar>
struct CachedStep {
  Matrix<Scalar> velocity;  // empty for the global group
  ShotKV<Scalar> kv;
};

// Context-causal forward of one new shot against cached history. Queries,
// keys and values are computed only for the new tokens; the returned K/V can
// be appended to the cache once the shot is final.
template <typename Scalar>
CachedStep<Scalar> forward_with_cache(const ModelWeights<Scalar>& w, const ShotInput<Scalar>& input,
                                      const KVCache<Scalar>& cache) {
  NoGradGuard no_grad;
  cache.check_shot(input.shot);
  if (cache.config() != w.config) throw SessionError("KV cache belongs to a model with a different geometry");
  const auto& shot = input.shot;
  if (static_cast<int>(input.prompt_ids.size()) != shot.text_len || input.video_tokens.rows() != shot.video_tokens() ||
      input.video_tokens.cols() != w.config.patch_dim()) {
    throw ShapeError("forward_with_cache: inputs do not match the shot descriptor");
  }
  Tensor<Scalar> text = gather_rows(w.token_embed, std::span<const int>(input.prompt_ids));
  Tensor<Scalar> video = linear(Tensor<Scalar>(input.video_tokens), w.patch_w, w.patch_b);
  const double ts[1] = {input.t};
  auto temb = silu(timestep_embed(w, std::span<const double>(ts, 1)));
  const auto rope = make_rope_table<Scalar>(shot_coords(shot, cache.next_offset()), w.config.head_dim(),
                                            w.config.rope_base);

  CachedStep<Scalar> step;
  step.kv.shot = shot;
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    const auto& block = w.blocks[b];
    auto out = block_forward(block, text, video, linear(temb, block.text.mod_w, block.text.mod_b),
                             linear(temb, block.video.mod_w, block.video.mod_b), rope, nullptr, w.config.heads,
                             &cache.keys(static_cast<int>(b)), &cache.values(static_cast<int>(b)));
    step.kv.keys.push_back(out.keys.value());
    step.kv.values.push_back(out.values.value());
    text = out.text;
    video = out.video;
  }
  if (!shot.is_global_group) {
    step.velocity = detail::final_layer(w, video, linear(temb, w.final_mod_w, w.final_mod_b)).value();
  }
  return step;
}

}  // namespace lct

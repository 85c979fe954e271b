// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Adam with decoupled weight decay, cosine learning-rate decay after a linear
// warmup, and global-norm gradient clipping.

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lct/config.hpp"
#include "lct/tensor.hpp"

namespace lct {

template <typename Scalar>
struct AdamState {
  long step = 0;
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
};

// Learning rate at (0-based) step `step` of a phase lasting `total` steps.
inline double scheduled_lr(const OptimizerConfig& c, long step, long total) {
  if (c.lr == 0.0) return 0.0;
  if (c.warmup_steps > 0 && step < c.warmup_steps) return c.lr * static_cast<double>(step + 1) / c.warmup_steps;
  const long span = std::max<long>(1, total - c.warmup_steps);
  const double progress = std::clamp(static_cast<double>(step - c.warmup_steps) / static_cast<double>(span), 0.0, 1.0);
  const double floor = c.min_lr_ratio * c.lr;
  return floor + 0.5 * (c.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

// Causal adaptation continues from the end of the LCT phase: a constant rate
// equal to the cosine floor the LCT schedule finishes at.
inline double causal_phase_lr(const OptimizerConfig& c) { return c.min_lr_ratio * c.lr; }

// Scales gradients in place so their global L2 norm is at most max_norm and
// returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(std::vector<Matrix<Scalar>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.squaredNorm());
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm) {
    const auto s = static_cast<Scalar>(max_norm / norm);
    for (auto& g : grads) g *= s;
  }
  return norm;
}

// One AdamW update over named parameters. Weight decay applies to weight
// matrices ("*_w") and the token embedding, not to biases.
template <typename Scalar>
void adamw_step(std::vector<std::pair<std::string, Tensor<Scalar>>>& params, const std::vector<Matrix<Scalar>>& grads,
                AdamState<Scalar>& state, const OptimizerConfig& c, double lr) {
  if (grads.size() != params.size()) throw ContractError("adamw_step: one gradient per parameter required");
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.push_back(Matrix<Scalar>::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix<Scalar>::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adamw_step: optimizer state does not match parameters");
  ++state.step;
  if (lr == 0.0) return;
  const auto b1 = static_cast<Scalar>(c.beta1);
  const auto b2 = static_cast<Scalar>(c.beta2);
  const auto bc1 = static_cast<Scalar>(1.0 - std::pow(c.beta1, static_cast<double>(state.step)));
  const auto bc2 = static_cast<Scalar>(1.0 - std::pow(c.beta2, static_cast<double>(state.step)));
  const auto step_lr = static_cast<Scalar>(lr);
  const auto eps = static_cast<Scalar>(c.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    auto& w = params[i].second.mutable_value();
    const auto& name = params[i].first;
    const bool decay = name.ends_with("_w") || name == "token_embed";
    if (decay && c.weight_decay > 0.0) w *= static_cast<Scalar>(1.0 - lr * c.weight_decay);
    w.array() -= step_lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
}

}  // namespace lct

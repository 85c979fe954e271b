// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lct/tensor.hpp"

namespace lct {

struct GradCheckReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<double> rel_err;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  double eps = 1e-3;
  double tol = 1e-3;
  // Denominator floor so that entries where both gradients vanish count as agreeing.
  double floor = 1e-8;
};

// Relative error |a - n| / max(|a|, |n|, floor) per element.
inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Compares reverse-mode gradients of a scalar function at x against central
// finite differences. x is used as a leaf; its value is restored on return.
template <typename Scalar>
GradCheckReport grad_check(const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f,
                           Tensor<Scalar> x, const GradCheckOptions& options = {}) {
  if (!(options.eps > 0)) throw ContractError("grad_check: eps must be positive");
  x.set_requires_grad(true);
  x.zero_grad();
  Tensor<Scalar> y = f(x);
  if (y.size() != 1) {
    throw ContractError("grad_check: function output must be scalar, got " +
                        shape_string(y.rows(), y.cols()));
  }
  y.backward();
  const Matrix<Scalar> analytic = x.grad();

  GradCheckReport report;
  NoGradGuard no_grad;
  Matrix<Scalar>& v = x.mutable_value();
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar saved = v.data()[i];
    const Scalar up = saved + Scalar(options.eps);
    const Scalar down = saved - Scalar(options.eps);
    v.data()[i] = up;
    const double plus = static_cast<double>(f(x).item());
    v.data()[i] = down;
    const double minus = static_cast<double>(f(x).item());
    v.data()[i] = saved;
    // Use the representable step rather than 2*eps.
    const double numeric = (plus - minus) / (static_cast<double>(up) - static_cast<double>(down));
    const double a = static_cast<double>(analytic.data()[i]);
    report.analytic.push_back(a);
    report.numeric.push_back(numeric);
    report.rel_err.push_back(relative_error(a, numeric, options.floor));
    report.max_rel_err = std::max(report.max_rel_err, report.rel_err.back());
  }
  report.pass = report.max_rel_err <= options.tol;
  return report;
}

}  // namespace lct

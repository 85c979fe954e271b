// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Dense rank-2 tensors with tape-free reverse-mode differentiation.
//
// A Tensor is a shared handle to a node holding a row-major Eigen matrix.
// Operations that see at least one input requiring gradients record a
// backward closure and references to their parents; backward() walks the
// resulting DAG once in reverse topological order. Vectors are 1 x n.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lct/errors.hpp"

namespace lct {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<Index>;

inline std::string shape_string(Index rows, Index cols) {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

namespace detail {

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Matrix<Scalar>&)> backward;

  void accumulate(const Matrix<Scalar>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

template <typename Scalar = float>
class Tensor {
 public:
  using NodeType = detail::Node<Scalar>;

  Tensor() : node_(std::make_shared<NodeType>()) {}

  explicit Tensor(Matrix<Scalar> value, bool requires_grad = false)
      : node_(std::make_shared<NodeType>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Matrix<Scalar>::Zero(rows, cols), requires_grad);
  }

  // Builds a tensor from a shape list and row-major data; rank 1 becomes 1 x n.
  static Tensor from_data(const Shape& shape, std::vector<Scalar> data, bool requires_grad = false) {
    if (shape.empty() || shape.size() > 2) {
      throw ShapeError("tensor rank must be 1 or 2");
    }
    const Index rows = shape.size() == 2 ? shape[0] : 1;
    const Index cols = shape.back();
    if (rows * cols != static_cast<Index>(data.size())) {
      throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_string(rows, cols));
    }
    Matrix<Scalar> m = Eigen::Map<const Matrix<Scalar>>(data.data(), rows, cols);
    return Tensor(std::move(m), requires_grad);
  }

  Shape shape() const { return {rows(), cols()}; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }

  const Matrix<Scalar>& value() const { return node_->value; }
  // In-place access for optimizer updates on leaf parameters.
  Matrix<Scalar>& mutable_value() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return node_->grad.size() != 0; }
  // Gradient of the last backward(); zeros when nothing flowed here.
  Matrix<Scalar> grad() const {
    if (!has_grad()) return Matrix<Scalar>::Zero(rows(), cols());
    return node_->grad;
  }
  void zero_grad() { node_->grad.resize(0, 0); }

  Scalar item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(rows(), cols()));
    return node_->value(0, 0);
  }

  Tensor detach() const { return Tensor(node_->value, false); }

  void backward() const {
    if (size() != 1) {
      throw ContractError("backward() requires a scalar output, got " + shape_string(rows(), cols()));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS; each node is emitted exactly once.
    std::vector<NodeType*> order;
    std::unordered_set<NodeType*> visited;
    std::vector<std::pair<NodeType*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        NodeType* parent = node->parents[next++].get();
        if (parent->requires_grad && visited.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }

    node_->accumulate(Matrix<Scalar>::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      NodeType* node = *it;
      if (node->backward && node->grad.size() != 0) {
        node->backward(node->grad);
      }
    }
    // Intermediate gradients are not observable after backward.
    for (NodeType* node : order) {
      if (node->backward) node->grad.resize(0, 0);
    }
  }

  const std::shared_ptr<NodeType>& node() const { return node_; }

 private:
  std::shared_ptr<NodeType> node_;
};

namespace detail {

template <typename Scalar>
bool any_requires_grad(std::initializer_list<const Tensor<Scalar>*> inputs) {
  if (!grad_mode()) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Wraps a computed value in a result node, recording parents and the
// backward closure only when gradients must flow.
template <typename Scalar, typename Backward>
Tensor<Scalar> make_result(Matrix<Scalar> value, std::vector<Tensor<Scalar>> parents,
                           Backward&& backward) {
  Tensor<Scalar> out(std::move(value));
  bool needs = false;
  if (grad_mode()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const auto& p : parents) node.parents.push_back(p.node());
    node.backward = std::forward<Backward>(backward);
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> expand(const Matrix<Scalar>& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix<Scalar>::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

// Sums a broadcast gradient back down to the operand's shape.
template <typename Scalar>
Matrix<Scalar> reduce_to(const Matrix<Scalar>& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix<Scalar> r = g;
  if (rows == 1 && g.rows() != 1) r = Matrix<Scalar>(r.colwise().sum());
  if (cols == 1 && g.cols() != 1) r = Matrix<Scalar>(r.rowwise().sum());
  return r;
}

inline std::pair<Index, Index> broadcast_shape(Index ar, Index ac, Index br, Index bc,
                                               const char* op) {
  auto dim = [&](Index a, Index b) -> Index {
    if (a == b) return a;
    if (a == 1) return b;
    if (b == 1) return a;
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(ar, ac) + " with " +
                     shape_string(br, bc));
  };
  return {dim(ar, br), dim(ac, bc)};
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_string(a.rows(), a.cols()) +
                     " and " + shape_string(b.rows(), b.cols()));
  }
  Matrix<Scalar> value(a.rows(), b.cols());
  value.noalias() = a.value() * b.value();
  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<Scalar>(std::move(value), {a, b}, [an, bn](const Matrix<Scalar>& g) {
    if (an->requires_grad) {
      Matrix<Scalar> ga(g.rows(), bn->value.rows());
      ga.noalias() = g * bn->value.transpose();
      an->accumulate(ga);
    }
    if (bn->requires_grad) {
      Matrix<Scalar> gb(an->value.cols(), g.cols());
      gb.noalias() = an->value.transpose() * g;
      bn->accumulate(gb);
    }
  });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  auto [rows, cols] = detail::broadcast_shape(a.rows(), a.cols(), b.rows(), b.cols(), "add");
  Matrix<Scalar> value = detail::expand(a.value(), rows, cols) + detail::expand(b.value(), rows, cols);
  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<Scalar>(std::move(value), {a, b}, [an, bn](const Matrix<Scalar>& g) {
    an->accumulate(detail::reduce_to(g, an->value.rows(), an->value.cols()));
    bn->accumulate(detail::reduce_to(g, bn->value.rows(), bn->value.cols()));
  });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  auto [rows, cols] = detail::broadcast_shape(a.rows(), a.cols(), b.rows(), b.cols(), "sub");
  Matrix<Scalar> value = detail::expand(a.value(), rows, cols) - detail::expand(b.value(), rows, cols);
  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<Scalar>(std::move(value), {a, b}, [an, bn](const Matrix<Scalar>& g) {
    an->accumulate(detail::reduce_to(g, an->value.rows(), an->value.cols()));
    if (bn->requires_grad) {
      bn->accumulate(detail::reduce_to(Matrix<Scalar>(-g), bn->value.rows(), bn->value.cols()));
    }
  });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  auto [rows, cols] = detail::broadcast_shape(a.rows(), a.cols(), b.rows(), b.cols(), "mul");
  Matrix<Scalar> ae = detail::expand(a.value(), rows, cols);
  Matrix<Scalar> be = detail::expand(b.value(), rows, cols);
  Matrix<Scalar> value = ae.cwiseProduct(be);
  auto an = a.node();
  auto bn = b.node();
  return detail::make_result<Scalar>(
      std::move(value), {a, b},
      [an, bn, ae = std::move(ae), be = std::move(be)](const Matrix<Scalar>& g) {
        if (an->requires_grad) {
          an->accumulate(detail::reduce_to(Matrix<Scalar>(g.cwiseProduct(be)), an->value.rows(),
                                           an->value.cols()));
        }
        if (bn->requires_grad) {
          bn->accumulate(detail::reduce_to(Matrix<Scalar>(g.cwiseProduct(ae)), bn->value.rows(),
                                           bn->value.cols()));
        }
      });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar factor) {
  auto xn = x.node();
  return detail::make_result<Scalar>(Matrix<Scalar>(x.value() * factor), {x},
                                     [xn, factor](const Matrix<Scalar>& g) {
                                       xn->accumulate(Matrix<Scalar>(g * factor));
                                     });
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& x, Scalar offset) {
  auto xn = x.node();
  return detail::make_result<Scalar>(Matrix<Scalar>(x.value().array() + offset), {x},
                                     [xn](const Matrix<Scalar>& g) { xn->accumulate(g); });
}

// Adds a constant matrix (no gradient to the constant); used for attention biases.
template <typename Scalar>
Tensor<Scalar> add_constant(const Tensor<Scalar>& x, const Matrix<Scalar>& c) {
  if (x.rows() != c.rows() || x.cols() != c.cols()) {
    throw ShapeError("add_constant: " + shape_string(x.rows(), x.cols()) + " vs " +
                     shape_string(c.rows(), c.cols()));
  }
  auto xn = x.node();
  return detail::make_result<Scalar>(Matrix<Scalar>(x.value() + c), {x},
                                     [xn](const Matrix<Scalar>& g) { xn->accumulate(g); });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& x) {
  auto xn = x.node();
  return detail::make_result<Scalar>(Matrix<Scalar>(x.value().transpose()), {x},
                                     [xn](const Matrix<Scalar>& g) {
                                       xn->accumulate(Matrix<Scalar>(g.transpose()));
                                     });
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Index rows, Index cols) {
  if (rows * cols != x.size()) {
    throw ShapeError("reshape: " + shape_string(x.rows(), x.cols()) + " into " +
                     shape_string(rows, cols));
  }
  Matrix<Scalar> value = Eigen::Map<const Matrix<Scalar>>(x.value().data(), rows, cols);
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(value), {x}, [xn](const Matrix<Scalar>& g) {
    xn->accumulate(Matrix<Scalar>(
        Eigen::Map<const Matrix<Scalar>>(g.data(), xn->value.rows(), xn->value.cols())));
  });
}

// Row-wise RMS normalisation without learned gain.
template <typename Scalar>
Tensor<Scalar> rms_norm(const Tensor<Scalar>& x, Scalar eps = Scalar(1e-6)) {
  const Index n = x.cols();
  Matrix<Scalar> inv(x.rows(), 1);
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar ms = x.value().row(r).squaredNorm() / Scalar(n);
    inv(r, 0) = Scalar(1) / std::sqrt(ms + eps);
    y.row(r) = x.value().row(r) * inv(r, 0);
  }
  auto xn = x.node();
  Matrix<Scalar> saved = y;
  return detail::make_result<Scalar>(
      std::move(y), {x}, [xn, inv = std::move(inv), saved = std::move(saved), n](const Matrix<Scalar>& g) {
        Matrix<Scalar> gx(g.rows(), g.cols());
        for (Index r = 0; r < g.rows(); ++r) {
          const Scalar dot = g.row(r).dot(saved.row(r)) / Scalar(n);
          gx.row(r) = (g.row(r) - saved.row(r) * dot) * inv(r, 0);
        }
        xn->accumulate(gx);
      });
}

template <typename Scalar>
Tensor<Scalar> silu(const Tensor<Scalar>& x) {
  Matrix<Scalar> sig = (Scalar(1) + (-x.value().array()).exp()).inverse().matrix();
  Matrix<Scalar> value = x.value().cwiseProduct(sig);
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(value), {x}, [xn, sig = std::move(sig)](const Matrix<Scalar>& g) {
    auto s = sig.array();
    auto xv = xn->value.array();
    xn->accumulate(Matrix<Scalar>((g.array() * (s * (Scalar(1) + xv * (Scalar(1) - s)))).matrix()));
  });
}

// Tanh approximation of GELU.
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  const Scalar k0 = Scalar(0.7978845608028654);  // sqrt(2/pi)
  const Scalar k1 = Scalar(0.044715);
  auto xv = x.value().array();
  Matrix<Scalar> th = (k0 * (xv + k1 * xv.cube())).tanh().matrix();
  Matrix<Scalar> value = (Scalar(0.5) * xv * (Scalar(1) + th.array())).matrix();
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(value), {x}, [xn, th = std::move(th), k0, k1](const Matrix<Scalar>& g) {
    auto v = xn->value.array();
    auto t = th.array();
    auto d = Scalar(0.5) * (Scalar(1) + t) +
             Scalar(0.5) * v * (Scalar(1) - t.square()) * k0 * (Scalar(1) + Scalar(3) * k1 * v.square());
    xn->accumulate(Matrix<Scalar>((g.array() * d).matrix()));
  });
}

// Softmax along axis 0 (columns) or 1 / -1 (rows). Entries equal to -inf
// receive exactly zero weight; NaN and +inf are rejected.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x, int axis = -1) {
  if (axis != 0 && axis != 1 && axis != -1) throw ShapeError("softmax: axis must be 0, 1 or -1");
  const bool rows = axis != 0;
  const Matrix<Scalar>& v = x.value();
  Matrix<Scalar> y(v.rows(), v.cols());
  const Index lanes = rows ? v.rows() : v.cols();
  for (Index i = 0; i < lanes; ++i) {
    auto in = [&](Index j) -> Scalar { return rows ? v(i, j) : v(j, i); };
    auto out = [&](Index j) -> Scalar& { return rows ? y(i, j) : y(j, i); };
    const Index len = rows ? v.cols() : v.rows();
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < len; ++j) {
      const Scalar e = in(j);
      if (std::isnan(e) || e == std::numeric_limits<Scalar>::infinity()) {
        throw NumericError("softmax: non-finite input");
      }
      mx = std::max(mx, e);
    }
    if (mx == -std::numeric_limits<Scalar>::infinity()) {
      throw NumericError("softmax: every entry of a lane is -inf");
    }
    Scalar total = 0;
    for (Index j = 0; j < len; ++j) {
      out(j) = std::exp(in(j) - mx);
      total += out(j);
    }
    const Scalar inv = Scalar(1) / total;
    for (Index j = 0; j < len; ++j) out(j) *= inv;
  }
  auto xn = x.node();
  Matrix<Scalar> saved = y;
  return detail::make_result<Scalar>(std::move(y), {x}, [xn, saved = std::move(saved), rows](const Matrix<Scalar>& g) {
    Matrix<Scalar> gy = g.cwiseProduct(saved);
    Matrix<Scalar> gx;
    if (rows) {
      Matrix<Scalar> dots = gy.rowwise().sum();
      gx = gy - saved.cwiseProduct(dots.replicate(1, saved.cols()));
    } else {
      Matrix<Scalar> dots = gy.colwise().sum();
      gx = gy - saved.cwiseProduct(dots.replicate(saved.rows(), 1));
    }
    xn->accumulate(gx);
  });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  Matrix<Scalar> value(1, 1);
  value(0, 0) = x.value().sum();
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(value), {x}, [xn](const Matrix<Scalar>& g) {
    xn->accumulate(Matrix<Scalar>::Constant(xn->value.rows(), xn->value.cols(), g(0, 0)));
  });
}

// Reduction along one axis: 0 gives 1 x cols, 1 gives rows x 1.
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("sum: axis must be 0 or 1");
  Matrix<Scalar> value = axis == 0 ? Matrix<Scalar>(x.value().colwise().sum())
                                   : Matrix<Scalar>(x.value().rowwise().sum());
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(value), {x}, [xn](const Matrix<Scalar>& g) {
    xn->accumulate(detail::expand(g, xn->value.rows(), xn->value.cols()));
  });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  if (x.size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), Scalar(1) / Scalar(x.size()));
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x, int axis) {
  const Index n = axis == 0 ? x.rows() : x.cols();
  return scale(sum(x, axis), Scalar(1) / Scalar(n));
}

// Embedding lookup: row ids[i] of table becomes row i of the result.
template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& table, std::span<const int> ids) {
  Matrix<Scalar> value(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    }
    value.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  auto tn = table.node();
  std::vector<int> idx(ids.begin(), ids.end());
  return detail::make_result<Scalar>(std::move(value), {table}, [tn, idx = std::move(idx)](const Matrix<Scalar>& g) {
    Matrix<Scalar> gt = Matrix<Scalar>::Zero(tn->value.rows(), tn->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Index>(i));
    tn->accumulate(gt);
  });
}

template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") outside " + shape_string(x.rows(), x.cols()));
  }
  Matrix<Scalar> value = x.value().middleRows(start, count);
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(value), {x}, [xn, start, count](const Matrix<Scalar>& g) {
    Matrix<Scalar> gx = Matrix<Scalar>::Zero(xn->value.rows(), xn->value.cols());
    gx.middleRows(start, count) = g;
    xn->accumulate(gx);
  });
}

template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") outside " + shape_string(x.rows(), x.cols()));
  }
  Matrix<Scalar> value = x.value().middleCols(start, count);
  auto xn = x.node();
  return detail::make_result<Scalar>(std::move(value), {x}, [xn, start, count](const Matrix<Scalar>& g) {
    Matrix<Scalar> gx = Matrix<Scalar>::Zero(xn->value.rows(), xn->value.cols());
    gx.middleCols(start, count) = g;
    xn->accumulate(gx);
  });
}

template <typename Scalar>
Tensor<Scalar> concat_rows(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  if (parts.size() == 1) return parts.front();
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts disagree");
    rows += p.rows();
  }
  Matrix<Scalar> value(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    offsets.push_back(at);
    at += p.rows();
  }
  std::vector<std::shared_ptr<detail::Node<Scalar>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_result<Scalar>(std::move(value), parts,
                                     [nodes = std::move(nodes), offsets = std::move(offsets)](const Matrix<Scalar>& g) {
                                       for (std::size_t i = 0; i < nodes.size(); ++i) {
                                         if (!nodes[i]->requires_grad) continue;
                                         nodes[i]->accumulate(Matrix<Scalar>(g.middleRows(offsets[i], nodes[i]->value.rows())));
                                       }
                                     });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  if (parts.size() == 1) return parts.front();
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts disagree");
    cols += p.cols();
  }
  Matrix<Scalar> value(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    at += p.cols();
  }
  std::vector<std::shared_ptr<detail::Node<Scalar>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_result<Scalar>(std::move(value), parts,
                                     [nodes = std::move(nodes), offsets = std::move(offsets)](const Matrix<Scalar>& g) {
                                       for (std::size_t i = 0; i < nodes.size(); ++i) {
                                         if (!nodes[i]->requires_grad) continue;
                                         nodes[i]->accumulate(Matrix<Scalar>(g.middleCols(offsets[i], nodes[i]->value.cols())));
                                       }
                                     });
}

// x W + b with b broadcast over rows.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  return add(matmul(x, weight), bias);
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return mul(a, b); }

}  // namespace lct

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tape-based reverse-mode automatic differentiation over dense matrices.
//
// Every value on a tape is a row-major matrix; column vectors are n x 1 and
// scalars are 1 x 1. Nodes are appended in creation order, so a node's
// inputs always carry smaller ids and the backward sweep simply walks the
// node list from the back. A tape is meant to live for one forward/backward
// pass; learnable state lives outside and is re-registered as leaves.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "minerf/linalg.hpp"

namespace minerf::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; does not own the value.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Receives the gradient flowing into the node being processed.
  using BackwardFn = std::function<void(Tape&, const Mat&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that participates in differentiation.
  Var variable(Mat value);
  Var variable(double value);
  /// Leaf that never receives a gradient.
  Var constant(Mat value);
  Var constant(double value);

  /// Appends an interior node. Inputs must live on this tape.
  Var record(Mat value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Mat value, std::span<const Var> inputs, BackwardFn backward);

  /// Seeds d(output)/d(output) = 1 and sweeps in reverse creation order.
  /// Output must be 1x1. Gradients from a previous sweep are discarded.
  void backward(Var output);

  /// Gradient after backward(); zeros of the right shape if none reached v.
  Mat grad(Var v) const;

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<int>& inputs(int id) const { return nodes_[static_cast<std::size_t>(id)].inputs; }

  /// Adds g into the gradient buffer of v. No-op when v does not need grads.
  void accumulate(Var v, const Mat& g);
  template <typename Expr>
  void accumulate_expr(Var v, const Expr& g) {
    auto& n = nodes_[static_cast<std::size_t>(v.id())];
    if (!n.requires_grad) return;
    // Gradients of distinct nodes never alias, so products skip the temporary.
    if (n.grad.size() == 0) {
      n.grad.resize(g.rows(), g.cols());
      n.grad.noalias() = g;
    } else {
      n.grad.noalias() += g;
    }
  }

  void clear() { nodes_.clear(); }

  /// Throws UsageError unless v belongs to this tape.
  void check_owned(Var v) const;

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

/// dL/dw for each requested leaf. L must be a 1x1 output on the same tape.
std::vector<Mat> grad(Tape& tape, Var output, std::span<const Var> wrt);
inline std::vector<Mat> grad(Tape& tape, Var output, std::initializer_list<Var> wrt) {
  return grad(tape, output, std::span<const Var>(wrt.begin(), wrt.size()));
}

// --- primitives -----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
inline Var hadamard(Var a, Var b) { return mul(a, b); }
/// W (m x n) times column x (n x 1).
Var matvec(Var W, Var x);
Var matmul(Var A, Var B);
Var sum(Var a);
Var mean(Var a);
/// Sum across columns: m x n -> m x 1.
Var row_sum(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var neg(Var a);
Var square(Var a);
Var sin(Var a);
Var cos(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// Stacks column vectors / matrices vertically.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Horizontal concatenation of equal-height blocks.
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
/// Rows [start, start+count).
Var slice(Var a, Eigen::Index start, Eigen::Index count);
/// Columns [start, start+count).
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
/// Adds the 1 x n row vector b to every row of a (m x n).
Var add_row(Var a, Var b);
Var transpose(Var a);
/// Row-major reshape.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// Frobenius norm; gradient taken as zero at the origin.
Var l2norm(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// --- gradient checking ----------------------------------------------------

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct FdReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

/// (parameter index, flat row-major entry index)
using ProbeEntry = std::pair<std::size_t, Eigen::Index>;

/// Compares tape gradients of f against central differences with the given
/// step. Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
FdReport finite_diff_check(const ScalarFn& f, std::span<const Mat> params, double step, double tol);
/// Same, restricted to the listed entries.
FdReport finite_diff_check(const ScalarFn& f, std::span<const Mat> params,
                           std::span<const ProbeEntry> probe, double step, double tol);

}  // namespace minerf::ad

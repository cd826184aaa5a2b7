// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "minerf/errors.hpp"

namespace minerf::ad {

namespace {

std::string shape(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + shape(a.value()) + " and " +
                         shape(b.value()));
  }
}

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (Var v : vars) {
    if (!v.valid()) throw UsageError("autodiff: uninitialized Var");
    if (t == nullptr) t = v.tape();
    if (v.tape() != t) throw UsageError("autodiff: operands live on different tapes");
  }
  return *t;
}

Tape& tape_of(std::span<const Var> vars) {
  if (vars.empty()) throw UsageError("autodiff: empty operand list");
  Tape* t = nullptr;
  for (Var v : vars) {
    if (!v.valid()) throw UsageError("autodiff: uninitialized Var");
    if (t == nullptr) t = v.tape();
    if (v.tape() != t) throw UsageError("autodiff: operands live on different tapes");
  }
  return *t;
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

const Mat& Var::value() const {
  if (!valid()) throw UsageError("autodiff: uninitialized Var");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Mat& v = value();
  if (v.size() != 1) throw UsageError("autodiff: scalar() on " + shape(v) + " value");
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Mat value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::variable(double value) { return variable(Mat(Mat::Constant(1, 1, value))); }

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double value) { return constant(Mat(Mat::Constant(1, 1, value))); }

void Tape::check_owned(Var v) const {
  if (!v.valid()) throw UsageError("autodiff: uninitialized Var");
  if (v.tape() != this) throw UsageError("autodiff: Var belongs to a different tape");
  if (v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    throw UsageError("autodiff: Var id out of range (tape cleared?)");
  }
}

Var Tape::record(Mat value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Mat value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var v : inputs) {
    check_owned(v);
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(v.id())].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(Var v, const Mat& g) { accumulate_expr(v, g); }

void Tape::backward(Var output) {
  check_owned(output);
  if (value(output.id()).size() != 1) {
    throw UsageError("autodiff: backward() needs a scalar output, got " +
                     shape(value(output.id())));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  auto& out = nodes_[static_cast<std::size_t>(output.id())];
  if (!out.requires_grad) return;
  out.grad = Mat::Ones(1, 1);
  for (int id = output.id(); id >= 0; --id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && n.grad.size() != 0) {
      // Inputs carry smaller ids, so no reallocation can happen here.
      const Mat& g = n.grad;
      n.backward(*this, g);
    }
  }
}

Mat Tape::grad(Var v) const {
  check_owned(v);
  const auto& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

std::vector<Mat> grad(Tape& tape, Var output, std::span<const Var> wrt) {
  for (Var w : wrt) tape.check_owned(w);
  tape.backward(output);
  std::vector<Mat> out;
  out.reserve(wrt.size());
  for (Var w : wrt) out.push_back(tape.grad(w));
  return out;
}

// --- primitives -----------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = tape_of({a, b});
  same_shape("add", a, b);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of({a, b});
  same_shape("sub", a, b);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate_expr(b, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of({a, b});
  same_shape("mul", a, b);
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.cwiseProduct(b.value()));
    t.accumulate_expr(b, g.cwiseProduct(a.value()));
  });
}

Var matvec(Var W, Var x) {
  if (x.cols() != 1) throw DimensionError("matvec: x must be a column vector, got " + shape(x.value()));
  return matmul(W, x);
}

Var matmul(Var A, Var B) {
  Tape& t = tape_of({A, B});
  if (A.cols() != B.rows()) {
    throw DimensionError("matmul: " + shape(A.value()) + " times " + shape(B.value()));
  }
  return t.record(A.value() * B.value(), {A, B}, [A, B](Tape& t, const Mat& g) {
    if (t.requires_grad(A)) t.accumulate_expr(A, g * B.value().transpose());
    if (t.requires_grad(B)) t.accumulate_expr(B, A.value().transpose() * g);
  });
}

Var sum(Var a) {
  Tape& t = tape_of({a});
  return t.record(Mat::Constant(1, 1, a.value().sum()), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, Mat::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  if (a.size() == 0) throw DimensionError("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var row_sum(Var a) {
  Tape& t = tape_of({a});
  return t.record(a.value().rowwise().sum(), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.replicate(1, a.cols()));
  });
}

Var relu(Var a) {
  Tape& t = tape_of({a});
  return t.record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Mat& g) {
    // Subgradient 0 at the kink.
    t.accumulate_expr(a, (a.value().array() > 0.0).select(g.array(), 0.0).matrix());
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of({a});
  Mat s = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
  Mat cached = s;
  return t.record(std::move(s), {a}, [a, cached = std::move(cached)](Tape& t, const Mat& g) {
    t.accumulate_expr(a, (g.array() * cached.array() * (1.0 - cached.array())).matrix());
  });
}

Var softplus(Var a) {
  Tape& t = tape_of({a});
  return t.record(a.value().unaryExpr([](double x) { return softplus_scalar(x); }), {a},
                  [a](Tape& t, const Mat& g) {
                    t.accumulate_expr(
                        a, g.cwiseProduct(a.value().unaryExpr([](double x) { return sigmoid_scalar(x); })));
                  });
}

Var exp(Var a) {
  Tape& t = tape_of({a});
  Mat e = a.value().array().exp().matrix();
  Mat cached = e;
  return t.record(std::move(e), {a}, [a, cached = std::move(cached)](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.cwiseProduct(cached));
  });
}

Var neg(Var a) {
  Tape& t = tape_of({a});
  return t.record(-a.value(), {a}, [a](Tape& t, const Mat& g) { t.accumulate_expr(a, -g); });
}

Var square(Var a) {
  Tape& t = tape_of({a});
  return t.record(a.value().array().square().matrix(), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var sin(Var a) {
  Tape& t = tape_of({a});
  return t.record(a.value().array().sin().matrix(), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, g.cwiseProduct(a.value().array().cos().matrix()));
  });
}

Var cos(Var a) {
  Tape& t = tape_of({a});
  return t.record(a.value().array().cos().matrix(), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, -g.cwiseProduct(a.value().array().sin().matrix()));
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of({a});
  return t.record(s * a.value(), {a}, [a, s](Tape& t, const Mat& g) { t.accumulate_expr(a, s * g); });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of({a});
  return t.record((a.value().array() + s).matrix(), {a},
                  [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
}

Var concat(std::span<const Var> parts) {
  Tape& t = tape_of(parts);
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (p.cols() != cols) throw DimensionError("concat: column counts differ");
    rows += p.rows();
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [saved](Tape& t, const Mat& g) {
    Eigen::Index r = 0;
    for (Var p : saved) {
      t.accumulate_expr(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  Tape& t = tape_of(parts);
  const auto rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [saved](Tape& t, const Mat& g) {
    Eigen::Index c = 0;
    for (Var p : saved) {
      t.accumulate_expr(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of({a});
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("slice: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") of " + shape(a.value()));
  }
  return t.record(a.value().middleRows(start, count), {a}, [a, start, count](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of({a});
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: cols [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") of " + shape(a.value()));
  }
  return t.record(a.value().middleCols(start, count), {a}, [a, start, count](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var add_row(Var a, Var b) {
  Tape& t = tape_of({a, b});
  if (b.rows() != 1 || b.cols() != a.cols()) {
    throw DimensionError("add_row: cannot broadcast " + shape(b.value()) + " over " +
                         shape(a.value()));
  }
  Mat out = a.value().rowwise() + b.value().row(0);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate_expr(b, g.colwise().sum());
  });
}

Var transpose(Var a) {
  Tape& t = tape_of({a});
  return t.record(a.value().transpose(), {a},
                  [a](Tape& t, const Mat& g) { t.accumulate_expr(a, g.transpose()); });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of({a});
  if (rows * cols != a.size()) {
    throw DimensionError("reshape: " + shape(a.value()) + " to " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return t.record(std::move(out), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_expr(a, Eigen::Map<const Mat>(g.data(), a.rows(), a.cols()));
  });
}

Var l2norm(Var a) {
  Tape& t = tape_of({a});
  const double n = a.value().norm();
  return t.record(Mat::Constant(1, 1, n), {a}, [a, n](Tape& t, const Mat& g) {
    if (n > 0.0) t.accumulate_expr(a, (g(0, 0) / n) * a.value());
  });
}

// --- gradient checking ----------------------------------------------------

namespace {

double eval_scalar(const ScalarFn& f, std::span<const Mat> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Mat& p : params) leaves.push_back(tape.constant(p));
  const double v = f(tape, leaves).scalar();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite function value");
  return v;
}

}  // namespace

FdReport finite_diff_check(const ScalarFn& f, std::span<const Mat> params, double step, double tol) {
  std::vector<ProbeEntry> probe;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index k = 0; k < params[p].size(); ++k) probe.emplace_back(p, k);
  }
  return finite_diff_check(f, params, probe, step, tol);
}

FdReport finite_diff_check(const ScalarFn& f, std::span<const Mat> params,
                           std::span<const ProbeEntry> probe, double step, double tol) {
  if (!(step > 0.0)) throw UsageError("finite_diff_check: step must be positive");

  std::vector<Mat> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Mat& p : params) leaves.push_back(tape.variable(p));
    Var out = f(tape, leaves);
    if (!std::isfinite(out.scalar())) throw NumericError("finite_diff_check: non-finite output");
    analytic = grad(tape, out, leaves);
  }

  std::vector<Mat> work(params.begin(), params.end());
  FdReport report;
  for (const auto& [p, k] : probe) {
    if (p >= work.size() || k < 0 || k >= work[p].size()) {
      throw UsageError("finite_diff_check: probe entry out of range");
    }
    double* x = work[p].data() + k;
    const double saved = *x;
    *x = saved + step;
    const double fp = eval_scalar(f, work);
    *x = saved - step;
    const double fm = eval_scalar(f, work);
    *x = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic[p].data()[k];
    if (!std::isfinite(a)) throw NumericError("finite_diff_check: non-finite analytic gradient");
    const double abs_err = std::abs(a - numeric);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    report.max_rel_err = std::max(report.max_rel_err, abs_err / denom);
    ++report.checked;
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace minerf::ad

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "minerf/autodiff.hpp"
#include "minerf/conditioning.hpp"
#include "minerf/errors.hpp"
#include "minerf/renderer.hpp"
#include "minerf/rng.hpp"
#include "minerf/tensor_core.hpp"

namespace minerf::verify {

namespace {

Mat randn(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Vec randv(int n, Rng& rng) { return randn(n, 1, rng).col(0); }

int dim(Rng& rng, int hi) { return 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi))); }

Check finish(std::string name, double max_dev, double tol, long cases) {
  return {std::move(name), max_dev < tol, max_dev, tol, cases};
}

std::vector<Check> tensor_suite(const VerifyOptions& o) {
  std::vector<Check> out;
  Rng rng(o.seed, {1});
  double dev_factored = 0.0;
  double dev_mixed = 0.0;
  double dev_contract = 0.0;
  for (int n = 0; n < o.cases; ++n) {
    const int d = dim(rng, 8);
    const int k = dim(rng, 8);
    const int od = dim(rng, 8);
    cond::MParams p{randn(k, d, rng), randn(k, d, rng), randn(od, k, rng), randn(od, d, rng), randn(od, d, rng)};
    const Vec e = randv(d, rng);
    const Vec i = randv(d, rng);
    const tensor::Tensor3 W = tensor::cp_expand({p.C, p.U1.transpose(), p.U2.transpose()});
    const Vec full = tensor::m_full_oracle(W, p.W2, p.W3, e, i);
    dev_factored = std::max(dev_factored, (cond::m_forward(p, e, i) - full).cwiseAbs().maxCoeff());

    // (U1 e) * (U2 i) == (U1^T kr U2^T)^T (e kron i)
    const Vec lhs = tensor::hadamard(p.U1 * e, p.U2 * i);
    Vec rhs = tensor::khatri_rao(p.U1.transpose(), p.U2.transpose()).transpose() * tensor::kron(e, i);
    if (o.inject_sign_fault) rhs = -rhs;
    dev_mixed = std::max(dev_mixed, (lhs - rhs).cwiseAbs().maxCoeff());

    Vec loop = Vec::Zero(od);
    for (int a = 0; a < od; ++a) {
      for (int b = 0; b < d; ++b) {
        for (int c = 0; c < d; ++c) loop[a] += W(a, b, c) * e[b] * i[c];
      }
    }
    dev_contract = std::max(dev_contract, (tensor::mode_contract(W, e, i) - loop).cwiseAbs().maxCoeff());
  }
  out.push_back(finish("factored_equals_full_tensor", dev_factored, 1e-10, o.cases));
  out.push_back(finish("mixed_product", dev_mixed, 1e-10, o.cases));
  out.push_back(finish("mode_contraction_loop", dev_contract, 1e-10, o.cases));
  return out;
}

cond::HParams random_h(int N, int d, int k, int od, Rng& rng) {
  cond::HParams p;
  for (int n = 0; n < N; ++n) {
    p.U_e.push_back(randn(k, d, rng));
    p.U_i.push_back(randn(k, d, rng));
  }
  p.C = randn(od, k, rng);
  return p;
}

std::vector<Check> props_suite(const VerifyOptions& o) {
  std::vector<Check> out;
  Rng rng(o.seed, {2});
  double dev2 = 0.0;
  double dev3 = 0.0;
  double dev3m = 0.0;
  for (int n = 0; n < o.cases; ++n) {
    const int d = dim(rng, 8);
    const int k = dim(rng, 8);
    const int od = dim(rng, 8);
    const Vec e = randv(d, rng);
    const Vec i = randv(d, rng);
    const auto p2 = random_h(2, d, k, od, rng);
    const auto rel = [](const Vec& a, const Vec& b) {
      return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
    };
    dev2 = std::max(dev2, rel(cond::h_forward(p2, e, i), cond::h_expand_oracle(p2, e, i)));
    const auto p3 = random_h(3, d, k, od, rng);
    dev3 = std::max(dev3, rel(cond::h_forward(p3, e, i), cond::h_expand_oracle(p3, e, i)));
    dev3m = std::max(dev3m, rel(cond::h_forward(p3, e, i, cond::HMode::MultiplicativeOnly),
                                cond::h_expand_oracle(p3, e, i, cond::HMode::MultiplicativeOnly)));
  }
  out.push_back(finish("degree2_expansion", dev2, 1e-10, o.cases));
  out.push_back(finish("degree3_expansion", dev3, 1e-10, o.cases));
  out.push_back(finish("degree3_multiplicative", dev3m, 1e-10, o.cases));
  return out;
}

struct Primitive {
  const char* name;
  std::vector<std::pair<int, int>> shapes;
  std::function<ad::Var(std::span<const ad::Var>)> fn;
};

std::vector<Check> autodiff_suite(const VerifyOptions& o) {
  using namespace ad;
  const std::vector<Primitive> prims = {
      {"add", {{3, 2}, {3, 2}}, [](auto v) { return add(v[0], v[1]); }},
      {"sub", {{3, 2}, {3, 2}}, [](auto v) { return sub(v[0], v[1]); }},
      {"mul", {{3, 2}, {3, 2}}, [](auto v) { return mul(v[0], v[1]); }},
      {"matvec", {{3, 4}, {4, 1}}, [](auto v) { return matvec(v[0], v[1]); }},
      {"matmul", {{3, 4}, {4, 2}}, [](auto v) { return matmul(v[0], v[1]); }},
      {"sum", {{3, 2}}, [](auto v) { return sum(v[0]); }},
      {"mean", {{3, 2}}, [](auto v) { return mean(v[0]); }},
      {"row_sum", {{3, 4}}, [](auto v) { return row_sum(v[0]); }},
      {"relu", {{4, 3}}, [](auto v) { return relu(v[0]); }},
      {"sigmoid", {{4, 3}}, [](auto v) { return sigmoid(v[0]); }},
      {"softplus", {{4, 3}}, [](auto v) { return softplus(v[0]); }},
      {"exp", {{4, 3}}, [](auto v) { return ad::exp(v[0]); }},
      {"neg", {{4, 3}}, [](auto v) { return neg(v[0]); }},
      {"square", {{4, 3}}, [](auto v) { return square(v[0]); }},
      {"sin", {{4, 3}}, [](auto v) { return ad::sin(v[0]); }},
      {"cos", {{4, 3}}, [](auto v) { return ad::cos(v[0]); }},
      {"scale", {{4, 3}}, [](auto v) { return scale(v[0], -1.7); }},
      {"add_scalar", {{4, 3}}, [](auto v) { return add_scalar(v[0], 0.3); }},
      {"concat", {{2, 3}, {3, 3}}, [](auto v) { return concat({v[0], v[1]}); }},
      {"concat_cols", {{3, 2}, {3, 1}}, [](auto v) { return concat_cols({v[0], v[1]}); }},
      {"slice", {{5, 2}}, [](auto v) { return slice(v[0], 1, 3); }},
      {"slice_cols", {{2, 5}}, [](auto v) { return slice_cols(v[0], 1, 3); }},
      {"add_row", {{4, 3}, {1, 3}}, [](auto v) { return add_row(v[0], v[1]); }},
      {"transpose", {{4, 3}}, [](auto v) { return transpose(v[0]); }},
      {"reshape", {{4, 3}}, [](auto v) { return reshape(v[0], 2, 6); }},
      {"l2norm", {{4, 3}}, [](auto v) { return l2norm(v[0]); }},
  };
  std::vector<Check> out;
  for (std::size_t q = 0; q < prims.size(); ++q) {
    const auto& prim = prims[q];
    Rng rng(o.seed, {3, q});
    std::vector<Mat> params;
    for (auto [r, c] : prim.shapes) {
      Mat m = randn(r, c, rng);
      // Keep relu inputs away from its kink.
      if (std::string_view(prim.name) == "relu") {
        m = m.unaryExpr([](double x) { return x >= 0 ? x + 0.1 : x - 0.1; });
      }
      params.push_back(std::move(m));
    }
    Tape scratch;
    std::vector<Var> vs;
    for (const auto& p : params) vs.push_back(scratch.constant(p));
    const Var shape = prim.fn(vs);
    const Mat weights = randn(static_cast<int>(shape.rows()), static_cast<int>(shape.cols()), rng);
    const ScalarFn f = [&](Tape& t, std::span<const Var> vs) { return sum(mul(prim.fn(vs), t.constant(weights))); };
    const auto rep = finite_diff_check(f, params, 1e-6, 1e-5);
    out.push_back({std::string("fd_") + prim.name, rep.pass, rep.max_rel_err, 1e-5, static_cast<long>(rep.checked)});
  }
  return out;
}

std::vector<Check> render_suite(const VerifyOptions& o) {
  std::vector<Check> out;
  // Homogeneous medium of density s and color c over length L.
  double dev_quad = 0.0;
  Rng rng(o.seed, {4});
  for (int n = 0; n < 20; ++n) {
    const double s = rng.uniform(0.1, 5.0);
    const double L = rng.uniform(0.5, 3.0);
    const Vec3 c(rng.uniform(), rng.uniform(), rng.uniform());
    const Vec3 bg(rng.uniform(), rng.uniform(), rng.uniform());
    render::SampleSet set;
    const int S = 256;
    for (int k = 0; k < S; ++k) {
      set.t.push_back(L * k / S);
      set.rgb.push_back(c);
      set.sigma.push_back(s);
    }
    set.t_far = L;
    const auto res = render::composite(set, bg);
    const Vec3 expect = c * (1.0 - std::exp(-s * L)) + bg * std::exp(-s * L);
    dev_quad = std::max(dev_quad, (res.color - expect).cwiseAbs().maxCoeff());
  }
  out.push_back(finish("homogeneous_quadrature", dev_quad, 1e-3, 20));

  double dev_unity = 0.0;
  for (int n = 0; n < o.cases; ++n) {
    render::SampleSet set;
    const int S = dim(rng, 64);
    double t = rng.uniform(0.0, 1.0);
    for (int k = 0; k < S; ++k) {
      set.t.push_back(t);
      t += rng.uniform() < 0.1 ? 0.0 : rng.uniform(0.0, 0.3);
      set.rgb.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
      set.sigma.push_back(rng.uniform() < 0.2 ? 0.0 : std::exp(rng.uniform(-4.0, 4.0)));
    }
    set.t_far = t + rng.uniform(0.0, 0.5);
    const auto res = render::composite(set, Vec3::Zero());
    double total = res.t_end;
    for (double w : res.weights) total += w;
    dev_unity = std::max(dev_unity, std::abs(total - 1.0));
  }
  out.push_back(finish("partition_of_unity", dev_unity, 1e-12, o.cases));
  return out;
}

}  // namespace

bool SuiteResult::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::vector<std::string> suite_names() { return {"tensor", "autodiff", "render", "props"}; }

SuiteResult run_suite(std::string_view name, const VerifyOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult r;
  r.suite = std::string(name);
  if (name == "tensor") {
    r.checks = tensor_suite(opts);
  } else if (name == "props") {
    r.checks = props_suite(opts);
  } else if (name == "autodiff") {
    r.checks = autodiff_suite(opts);
  } else if (name == "render") {
    r.checks = render_suite(opts);
  } else {
    throw UsageError("unknown verify suite '" + std::string(name) + "'");
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

nlohmann::json to_json(const SuiteResult& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"max_dev", c.max_dev}, {"tol", c.tol}, {"cases", c.cases}});
  }
  return {{"suite", r.suite}, {"pass", r.pass()}, {"seconds", r.seconds}, {"checks", checks}};
}

}  // namespace minerf::verify

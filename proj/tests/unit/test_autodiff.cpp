// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <functional>
#include <string>

#include "minerf/autodiff.hpp"
#include "minerf/conditioning.hpp"
#include "minerf/errors.hpp"
#include "minerf/renderer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace minerf;
using namespace minerf::ad;
using testsupport::random_mat;

TEST_CASE("relu forward and subgradient") {
  Tape t;
  Mat x(2, 1);
  x << -1, 2;
  Var v = t.variable(x);
  Var y = relu(v);
  CHECK(y.value()(0, 0) == 0.0);
  CHECK(y.value()(1, 0) == 2.0);
  t.backward(sum(y));
  CHECK(t.grad(v)(0, 0) == 0.0);
  CHECK(t.grad(v)(1, 0) == 1.0);

  Tape t0;
  Var z = t0.variable(0.0);
  t0.backward(sum(relu(z)));
  CHECK(t0.grad(z)(0, 0) == 0.0);
}

TEST_CASE("sigmoid at zero") {
  Tape t;
  Var x = t.variable(0.0);
  Var s = sigmoid(x);
  CHECK(s.scalar() == 0.5);
  t.backward(s);
  CHECK(t.grad(x)(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("matvec gradient follows the transpose rule") {
  Rng rng(21);
  const Mat W = random_mat(3, 2, rng), x = random_mat(2, 1, rng), seed = random_mat(3, 1, rng);
  Tape t;
  Var wv = t.variable(W), xv = t.variable(x);
  t.backward(sum(mul(matvec(wv, xv), t.constant(seed))));
  CHECK(testsupport::max_abs(t.grad(xv) - W.transpose() * seed) < 1e-15);
  CHECK(testsupport::max_abs(t.grad(wv) - seed * x.transpose()) < 1e-15);

  const ScalarFn f = [&](Tape& tp, std::span<const Var> v) { return sum(mul(matvec(v[0], v[1]), tp.constant(seed))); };
  const std::vector<Mat> params{W, x};
  CHECK(finite_diff_check(f, params, 1e-5, 1e-5).pass);
}

TEST_CASE("grad examples") {
  Tape t;
  Var w = t.variable(4.0);
  CHECK(grad(t, w, {w})[0](0, 0) == 1.0);

  Tape t2;
  Mat wv(3, 1);
  wv << 1, 2, 3;
  Var u = t2.variable(wv);
  const Mat g = grad(t2, matmul(transpose(u), u), {u})[0];
  CHECK(g(0, 0) == 2.0);
  CHECK(g(1, 0) == 4.0);
  CHECK(g(2, 0) == 6.0);

  // Fan-out accumulates.
  Tape t3;
  Var a = t3.variable(3.0);
  CHECK(grad(t3, add(mul(a, a), a), {a})[0](0, 0) == 7.0);
}

TEST_CASE("M-module mean-square output matches central differences") {
  Rng rng(22);
  const int d = 4, k = 2, o = 4;
  std::vector<Mat> params{random_mat(k, d, rng), random_mat(k, d, rng), random_mat(o, k, rng), random_mat(o, d, rng),
                          random_mat(o, d, rng), random_mat(d, 1, rng), random_mat(d, 1, rng)};
  const ScalarFn f = [](Tape&, std::span<const Var> v) {
    const cond::MVars p{v[0], v[1], v[2], v[3], v[4]};
    return mean(square(cond::m_forward(p, v[5], v[6])));
  };
  const auto rep = finite_diff_check(f, params, 1e-5, 1e-5);
  CHECK(rep.max_rel_err < 1e-5);
  CHECK(rep.pass);
}

TEST_CASE("finite_diff_check examples and errors") {
  const ScalarFn sq = [](Tape&, std::span<const Var> v) { return sum(square(v[0])); };
  std::vector<Mat> w{Mat::Constant(1, 1, 3.0)};
  auto rep = finite_diff_check(sq, w, 1e-5, 1e-6);
  CHECK(rep.pass);
  CHECK(rep.checked == 1);

  const ScalarFn lin = [](Tape& t, std::span<const Var> v) {
    Mat c(3, 1);
    c << 1.5, -2.0, 0.25;
    return sum(mul(v[0], t.constant(c)));
  };
  std::vector<Mat> x{Mat::Ones(3, 1)};
  CHECK(finite_diff_check(lin, x, 1e-3, 1e-9).max_rel_err < 1e-9);

  CHECK_THROWS_AS(finite_diff_check(sq, w, 0.0, 1e-5), UsageError);
  const ScalarFn blow = [](Tape&, std::span<const Var> v) { return sum(ad::exp(scale(v[0], 1e6))); };
  CHECK_THROWS_AS(finite_diff_check(blow, w, 1e-5, 1e-5), NumericError);
}

TEST_CASE("compositing loss of 8 samples passes the gradient check") {
  Rng rng(23);
  const int S = 8;
  Mat deltas(2, S);
  for (int r = 0; r < 2; ++r) {
    for (int s = 0; s < S; ++s) deltas(r, s) = rng.uniform(0.05, 0.3);
  }
  std::vector<Mat> params{random_mat(2, S, rng, 0.1, 3.0), random_mat(2 * S, 3, rng, 0.0, 1.0)};
  const Mat target = random_mat(2, 3, rng, 0.0, 1.0);
  const Vec3 bg(0.1, 0.2, 0.3);
  const ScalarFn f = [&](Tape& t, std::span<const Var> v) {
    Var c = render::composite_batch(v[0], v[1], deltas, bg);
    return sum(square(sub(c, t.constant(target))));
  };
  const auto rep = finite_diff_check(f, params, 1e-6, 1e-4);
  CHECK(rep.max_rel_err < 1e-4);
}


TEST_CASE("every primitive passes central differences on 50 random instances") {
  for (const auto& prim : testsupport::primitives()) {
    CAPTURE(prim.name);
    double worst = 0.0;
    for (int n = 0; n < 50; ++n) {
      Rng rng(24, {std::hash<std::string>{}(prim.name), static_cast<std::uint64_t>(n)});
      std::vector<Mat> params;
      for (auto [r, c] : prim.shapes) {
        Mat m = random_mat(r, c, rng, -2.0, 2.0);
        if (prim.avoid_zero) m = m.unaryExpr([](double x) { return x >= 0 ? x + 0.05 : x - 0.05; });
        params.push_back(m);
      }
      Tape probe;
      std::vector<Var> pv;
      for (const auto& p : params) pv.push_back(probe.constant(p));
      const Var shape = prim.fn(pv);
      const Mat weights = random_mat(static_cast<int>(shape.rows()), static_cast<int>(shape.cols()), rng, 0.5, 1.5);
      const ScalarFn f = [&](Tape& t, std::span<const Var> v) { return sum(mul(prim.fn(v), t.constant(weights))); };
      worst = std::max(worst, finite_diff_check(f, params, 1e-5, 1e-5).max_rel_err);
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("backward accumulation is linear over independent subgraphs") {
  Rng rng(25);
  const Mat a = random_mat(3, 3, rng), b = random_mat(3, 1, rng);
  const auto f1 = [](Var x, Var y) { return sum(ad::sin(matmul(x, y))); };
  const auto f2 = [](Var x, Var y) { return sum(square(matmul(x, y))); };
  Tape t;
  Var x = t.variable(a), y = t.variable(b);
  const auto both = grad(t, add(f1(x, y), f2(x, y)), {x, y});
  Tape t1;
  Var x1 = t1.variable(a), y1 = t1.variable(b);
  const auto g1 = grad(t1, f1(x1, y1), {x1, y1});
  Tape t2;
  Var x2 = t2.variable(a), y2 = t2.variable(b);
  const auto g2 = grad(t2, f2(x2, y2), {x2, y2});
  CHECK(testsupport::max_abs(both[0] - (g1[0] + g2[0])) < 1e-14);
  CHECK(testsupport::max_abs(both[1] - (g1[1] + g2[1])) < 1e-14);
}

TEST_CASE("forward and backward are bit-identical when repeated") {
  Rng rng(26);
  const Mat a = random_mat(5, 4, rng), b = random_mat(4, 3, rng);
  const auto run = [&] {
    Tape t;
    Var x = t.variable(a), y = t.variable(b);
    Var out = mean(softplus(matmul(x, y)));
    auto g = grad(t, out, {x, y});
    return std::make_pair(out.scalar(), g);
  };
  const auto r1 = run();
  const auto r2 = run();
  CHECK(r1.first == r2.first);
  CHECK(r1.second[0] == r2.second[0]);
  CHECK(r1.second[1] == r2.second[1]);
}

TEST_CASE("tape structure and error paths") {
  Tape t;
  Var a = t.variable(Mat::Ones(2, 3));
  Var b = t.variable(Mat::Ones(3, 2));
  Var c = matmul(a, b);
  for (int in : t.inputs(c.id())) CHECK(in < c.id());
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(t.backward(c), UsageError);
  Tape other;
  Var z = other.variable(Mat::Ones(2, 3));
  CHECK_THROWS_AS(add(a, z), UsageError);
  CHECK_THROWS_AS(matvec(a, a), DimensionError);
  // Constants receive no gradient; unreached variables report zeros.
  Var k = t.constant(Mat::Ones(2, 3));
  Var unused = t.variable(Mat::Ones(4, 4));
  t.backward(sum(mul(a, k)));
  CHECK(t.grad(k) == Mat::Zero(2, 3));
  CHECK(t.grad(unused) == Mat::Zero(4, 4));
  CHECK(t.grad(a) == Mat::Ones(2, 3));
}

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared generators and brute-force reference loops for the test suites.
// Oracles here only use plain loops, never the library kernels they check.

#include <cmath>
#include <cstdint>
#include <vector>

#include "minerf/linalg.hpp"
#include "minerf/rng.hpp"

namespace testsupport {

using minerf::Mat;
using minerf::Vec;

inline Mat random_mat(int r, int c, minerf::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

inline Vec random_vec(int n, minerf::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

inline int random_dim(minerf::Rng& rng, int hi) { return 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi))); }

inline Vec loop_matvec(const Mat& W, const Vec& x) {
  Vec out = Vec::Zero(W.rows());
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    for (Eigen::Index c = 0; c < W.cols(); ++c) out[r] += W(r, c) * x[c];
  }
  return out;
}

/// sum_j C[a,j] U1[j,b] U2[j,c] e[b] i[c] + W2 e + W3 i, by explicit loops
/// over the dense tensor built from the factors.
inline Vec loop_full_tensor_m(const Mat& U1, const Mat& U2, const Mat& C, const Mat& W2, const Mat& W3,
                              const Vec& e, const Vec& i) {
  const auto o = C.rows();
  const auto k = C.cols();
  const auto d = U1.cols();
  std::vector<double> W(static_cast<std::size_t>(o * d * d), 0.0);
  for (Eigen::Index a = 0; a < o; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      for (Eigen::Index c = 0; c < d; ++c) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) s += C(a, j) * U1(j, b) * U2(j, c);
        W[static_cast<std::size_t>((a * d + b) * d + c)] = s;
      }
    }
  }
  Vec out = loop_matvec(W2, e) + loop_matvec(W3, i);
  for (Eigen::Index a = 0; a < o; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      for (Eigen::Index c = 0; c < d; ++c) out[a] += W[static_cast<std::size_t>((a * d + b) * d + c)] * e[b] * i[c];
    }
  }
  return out;
}

inline double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace testsupport

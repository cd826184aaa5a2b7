// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense small-tensor kernels for third-order interaction tensors and their
// CP factorization. Everything here is a pure function over its inputs.

#include <cstddef>
#include <span>
#include <vector>

#include "minerf/linalg.hpp"

namespace minerf::tensor {

/// Dense o x d x d tensor, row-major: (a,b,c) -> a*d*d + b*d + c.
class Tensor3 {
 public:
  Tensor3(int o, int d);
  Tensor3(int o, int d, std::vector<double> data);

  static Tensor3 zeros(int o, int d) { return Tensor3(o, d); }

  int o() const { return o_; }
  int d() const { return d_; }

  double& operator()(int a, int b, int c) { return data_[index(a, b, c)]; }
  double operator()(int a, int b, int c) const { return data_[index(a, b, c)]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  /// Mode-1 unfolding, o x (d*d) with column index b*d + c.
  Mat unfold1() const;

 private:
  std::size_t index(int a, int b, int c) const {
    return (static_cast<std::size_t>(a) * d_ + b) * d_ + c;
  }

  int o_;
  int d_;
  std::vector<double> data_;
};

/// CP factors of a Tensor3: W[a,b,c] = sum_j C[a,j] A[b,j] B[c,j].
struct FactorTriple {
  Mat C;  // o x k
  Mat A;  // d x k
  Mat B;  // d x k

  int rank() const { return static_cast<int>(C.cols()); }
  void validate() const;
};

Vec hadamard(const Vec& a, const Vec& b);

/// Column-wise Kronecker product. Row index of the result is r*rows(B) + s
/// for A row r and B row s.
Mat khatri_rao(const Mat& A, const Mat& B);

/// Kronecker product of two vectors, index r*size(b) + s.
Vec kron(const Vec& a, const Vec& b);

/// W x_2 e x_3 i.
Vec mode_contract(const Tensor3& W, const Vec& e, const Vec& i);

Tensor3 cp_expand(const FactorTriple& f);

/// Full multiplicative interaction with linear terms:
/// W x_2 e x_3 i + W2 e + W3 i.
Vec m_full_oracle(const Tensor3& W, const Mat& W2, const Mat& W3, const Vec& e, const Vec& i);

}  // namespace minerf::tensor

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/tensor_core.hpp"

#include <cmath>
#include <string>

#include "minerf/errors.hpp"

namespace minerf::tensor {

namespace {

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite entry");
  }
}

}  // namespace

Tensor3::Tensor3(int o, int d) : Tensor3(o, d, std::vector<double>(std::size_t(o) * d * d, 0.0)) {}

Tensor3::Tensor3(int o, int d, std::vector<double> data) : o_(o), d_(d), data_(std::move(data)) {
  if (o <= 0 || d <= 0) throw DimensionError("Tensor3: dimensions must be positive");
  if (data_.size() != std::size_t(o) * d * d) {
    throw DimensionError("Tensor3: data length " + std::to_string(data_.size()) +
                         " != o*d*d = " + std::to_string(std::size_t(o) * d * d));
  }
  require_finite(data_, "Tensor3");
}

Mat Tensor3::unfold1() const {
  return Eigen::Map<const Mat>(data_.data(), o_, Eigen::Index(d_) * d_);
}

void FactorTriple::validate() const {
  const auto k = C.cols();
  if (k <= 0) throw DimensionError("FactorTriple: rank must be positive");
  if (A.cols() != k || B.cols() != k) {
    throw DimensionError("FactorTriple: column counts differ (C " + dims(C.rows(), C.cols()) +
                         ", A " + dims(A.rows(), A.cols()) + ", B " + dims(B.rows(), B.cols()) + ")");
  }
  if (A.rows() != B.rows()) throw DimensionError("FactorTriple: A and B must have equal rows");
  if (!C.allFinite() || !A.allFinite() || !B.allFinite()) {
    throw NumericError("FactorTriple: non-finite entry");
  }
}

Vec hadamard(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("hadamard: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  return a.cwiseProduct(b);
}

Mat khatri_rao(const Mat& A, const Mat& B) {
  if (A.cols() != B.cols()) {
    throw DimensionError("khatri_rao: column mismatch " + dims(A.rows(), A.cols()) + " vs " +
                         dims(B.rows(), B.cols()));
  }
  Mat out(A.rows() * B.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    out.middleRows(r * B.rows(), B.rows()) = B.array().rowwise() * A.row(r).array();
  }
  return out;
}

Vec kron(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Eigen::Index r = 0; r < a.size(); ++r) out.segment(r * b.size(), b.size()) = a[r] * b;
  return out;
}

Vec mode_contract(const Tensor3& W, const Vec& e, const Vec& i) {
  if (e.size() != W.d() || i.size() != W.d()) {
    throw DimensionError("mode_contract: tensor d=" + std::to_string(W.d()) + ", e has " +
                         std::to_string(e.size()) + ", i has " + std::to_string(i.size()));
  }
  return W.unfold1() * kron(e, i);
}

Tensor3 cp_expand(const FactorTriple& f) {
  f.validate();
  const int o = static_cast<int>(f.C.rows());
  const int d = static_cast<int>(f.A.rows());
  // Mode-1 unfolding is C (A kr B)^T with the A-major row ordering above.
  const Mat unfolded = f.C * khatri_rao(f.A, f.B).transpose();
  std::vector<double> data(unfolded.data(), unfolded.data() + unfolded.size());
  return Tensor3(o, d, std::move(data));
}

Vec m_full_oracle(const Tensor3& W, const Mat& W2, const Mat& W3, const Vec& e, const Vec& i) {
  if (W2.rows() != W.o() || W3.rows() != W.o() || W2.cols() != e.size() ||
      W3.cols() != i.size()) {
    throw DimensionError("m_full_oracle: W2 " + dims(W2.rows(), W2.cols()) + ", W3 " +
                         dims(W3.rows(), W3.cols()) + " incompatible with tensor o=" +
                         std::to_string(W.o()));
  }
  return mode_contract(W, e, i) + W2 * e + W3 * i;
}

}  // namespace minerf::tensor

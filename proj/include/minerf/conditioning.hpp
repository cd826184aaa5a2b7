// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Identity/expression interaction modules that produce the conditioning
// vector fed to the radiance field.
//
// The main module is
//     M(e, i) = C [ (U1 e) * (U2 i) ] + W2 e + W3 i
// and its high-degree extension H runs the recursion
//     x_1 = U(1,1) e + U(1,2) i,   x_n = x_{n-1} + (U(n,1) e + U(n,2) i) * x_{n-1}
// returning C x_N. The remaining variants are the ablations (linear only,
// fixed Hadamard, shared projections, full tensor, concatenation, ...).

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "minerf/autodiff.hpp"
#include "minerf/linalg.hpp"

namespace minerf::cond {

enum class VariantId {
  Baseline,         // [e ; i]
  A1,               // W2 e + W3 i
  A2,               // (e * i) + W2 e + W3 i
  A3,               // W1 (e * i) + W1 e + W1 i
  A4,               // W1 (e * i)
  A5,               // (W2 e) * (W3 i) + W2 e + W3 i
  A6,               // W1 (e * i) + W2 e + W3 i
  A7,               // W x2 e x3 i
  M,
  H,
  HigherOut_o256,   // M with a wide output
  LearnableConcat,  // [W2 e ; W3 i]
  LatentInM,        // third-order interaction over (e, i, l)
};

std::string_view to_string(VariantId v);
/// Throws ConfigError on an unknown name.
VariantId variant_from_string(std::string_view name);
std::vector<VariantId> all_variants();

struct CondDims {
  int d = 8;         // expression / identity dimension
  int k = 4;         // rank of the factored interaction
  int o = 0;         // output dimension; 0 picks the variant default
  int n_levels = 2;  // degree N of H
  int d_latent = 8;  // per-frame latent dimension
};

/// Output dimension after resolving o = 0 (d, or 256 for HigherOut_o256).
int resolved_o(VariantId v, const CondDims& dims);
/// Length of the conditioning vector the variant produces.
int output_dim(VariantId v, const CondDims& dims);
/// False when the latent code is consumed inside the module (LatentInM).
bool field_takes_latent(VariantId v);

struct ParamShape {
  std::string name;
  int rows;
  int cols;
  int fan_in;
  int fan_out;
};

/// Learnable tensors of a variant. Throws ConfigError for invalid dims
/// (A2/A3/A4 require o == d).
std::vector<ParamShape> param_shapes(VariantId v, const CondDims& dims);

using VarMap = std::map<std::string, ad::Var, std::less<>>;

/// Conditioning vector for any variant. `params` is keyed by the names of
/// param_shapes(); `l` is only read by LatentInM.
ad::Var variant_forward(VariantId v, const CondDims& dims, const VarMap& params, ad::Var e,
                        ad::Var i, ad::Var l);

// --- M ----------------------------------------------------------------------

struct MParams {
  Mat U1;  // k x d
  Mat U2;  // k x d
  Mat C;   // o x k
  Mat W2;  // o x d
  Mat W3;  // o x d
};

struct MVars {
  ad::Var U1, U2, C, W2, W3;
};

ad::Var m_forward(const MVars& p, ad::Var e, ad::Var i);
Vec m_forward(const MParams& p, const Vec& e, const Vec& i);

// --- H ----------------------------------------------------------------------

/// Full recursion, or the purely multiplicative x_n = a_n * x_{n-1}.
enum class HMode { Full, MultiplicativeOnly };

struct HParams {
  std::vector<Mat> U_e;  // U(n,1), k x d, n = 1..N
  std::vector<Mat> U_i;  // U(n,2), k x d
  Mat C;                 // o x k

  int degree() const { return static_cast<int>(U_e.size()); }
};

struct HVars {
  std::vector<ad::Var> U_e, U_i;
  ad::Var C;
};

ad::Var h_forward(const HVars& p, ad::Var e, ad::Var i, HMode mode = HMode::Full);
Vec h_forward(const HParams& p, const Vec& e, const Vec& i, HMode mode = HMode::Full);

/// Term-by-term expansion of H by distributing every product; each term is
/// C applied to a Hadamard product of single projections U(n,1)e / U(n,2)i.
/// Supports N in {2, 3}.
Vec h_expand_oracle(const HParams& p, const Vec& e, const Vec& i, HMode mode = HMode::Full);

}  // namespace minerf::cond

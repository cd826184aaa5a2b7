// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Conditioned radiance field: (conditioning, latent, x, v) -> (rgb, sigma).
//
// Backbone input is [gamma(x) ; cond ; latent]; the density head reads the
// last backbone activation, and the color branch reads that activation
// together with gamma(v). Density therefore never depends on v.

#include <map>
#include <string>
#include <vector>

#include "minerf/autodiff.hpp"
#include "minerf/conditioning.hpp"
#include "minerf/linalg.hpp"

namespace minerf::field {

struct FieldConfig {
  int layers = 4;
  int hidden = 64;
  int Lx = 6;
  int Lv = 2;
  int color_layers = 2;
  int color_hidden = 32;
  int cond_dim = 8;
  int latent_dim = 8;

  /// Input re-injection before the sixth linear layer on deep backbones.
  bool has_skip() const { return layers >= 8; }
  static constexpr int kSkipLayer = 5;

  int enc_x_dim() const { return 6 * Lx; }
  int enc_v_dim() const { return 6 * Lv; }
  void validate() const;
};

std::vector<cond::ParamShape> param_shapes(const FieldConfig& cfg);

/// Per component: sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p),
/// cos(2^(L-1) pi p). L = 0 yields an empty vector.
Vec positional_encode(const Vec& p, int L);
/// Row-wise encoding of an N x dim matrix.
Mat positional_encode_rows(const Mat& points, int L);

struct FieldOutput {
  ad::Var rgb;    // N x 3, in [0,1]
  ad::Var sigma;  // N x 1, >= 0
};

/// Batched forward over N samples sharing one conditioning vector and
/// latent. `latent` may be invalid when latent_dim == 0.
FieldOutput field_forward(const FieldConfig& cfg, const cond::VarMap& params, ad::Var cond,
                          ad::Var latent, const Mat& enc_x, const Mat& enc_v);

struct PointOutput {
  Vec3 rgb;
  double sigma;
};

/// Single-point evaluation. A non-unit v is normalized and counted in
/// `direction_warnings()`.
PointOutput field_forward(const FieldConfig& cfg, const std::map<std::string, Mat, std::less<>>& params,
                          const Vec& cond, const Vec& latent, const Vec3& x, Vec3 v);

long direction_warnings();

}  // namespace minerf::field

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/field.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "minerf/errors.hpp"

namespace minerf::field {

namespace {

std::atomic<long> g_direction_warnings{0};

cond::ParamShape lin(std::string name, int in, int out) { return {std::move(name), in, out, in, out}; }
cond::ParamShape bias(std::string name, int out) { return {std::move(name), 1, out, 0, 0}; }

ad::Var need(const cond::VarMap& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("field: missing parameter '" + name + "'");
  return it->second;
}

// Contribution of the non-positional inputs to a layer that reads them:
// one row vector shared by every sample.
ad::Var shared_row(const cond::VarMap& params, const std::string& layer, ad::Var cond,
                   ad::Var latent, const FieldConfig& cfg) {
  using namespace ad;
  Var row = add(matmul(transpose(cond), need(params, layer + ".Wc")), need(params, layer + ".b"));
  if (cfg.latent_dim > 0) row = add(row, matmul(transpose(latent), need(params, layer + ".Wl")));
  return row;
}

}  // namespace

void FieldConfig::validate() const {
  if (layers < 1 || hidden < 1 || color_layers < 0 || color_hidden < 1 || Lx < 0 || Lv < 0 ||
      cond_dim < 0 || latent_dim < 0) {
    throw ConfigError("field: invalid configuration");
  }
}

std::vector<cond::ParamShape> param_shapes(const FieldConfig& cfg) {
  cfg.validate();
  std::vector<cond::ParamShape> out;
  const auto input_block = [&](const std::string& layer) {
    out.push_back(lin(layer + ".Wx", cfg.enc_x_dim(), cfg.hidden));
    out.push_back(lin(layer + ".Wc", cfg.cond_dim, cfg.hidden));
    if (cfg.latent_dim > 0) out.push_back(lin(layer + ".Wl", cfg.latent_dim, cfg.hidden));
  };
  input_block("l0");
  out.push_back(bias("l0.b", cfg.hidden));
  for (int n = 1; n < cfg.layers; ++n) {
    const std::string name = "l" + std::to_string(n);
    out.push_back(lin(name + ".W", cfg.hidden, cfg.hidden));
    if (cfg.has_skip() && n == FieldConfig::kSkipLayer) input_block(name);
    out.push_back(bias(name + ".b", cfg.hidden));
  }
  out.push_back(lin("sigma.W", cfg.hidden, 1));
  out.push_back(bias("sigma.b", 1));

  int width = cfg.hidden;
  for (int n = 0; n < cfg.color_layers; ++n) {
    const std::string name = "color" + std::to_string(n);
    out.push_back(lin(name + ".W", width, cfg.color_hidden));
    if (n == 0) out.push_back(lin(name + ".Wv", cfg.enc_v_dim(), cfg.color_hidden));
    out.push_back(bias(name + ".b", cfg.color_hidden));
    width = cfg.color_hidden;
  }
  out.push_back(lin("rgb.W", width, 3));
  if (cfg.color_layers == 0) out.push_back(lin("rgb.Wv", cfg.enc_v_dim(), 3));
  out.push_back(bias("rgb.b", 3));
  return out;
}

Vec positional_encode(const Vec& p, int L) {
  if (L < 0) throw UsageError("positional_encode: negative frequency count");
  Vec out(2 * L * p.size());
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    double f = std::numbers::pi;
    for (int l = 0; l < L; ++l, f *= 2.0) {
      out[2 * (c * L + l)] = std::sin(f * p[c]);
      out[2 * (c * L + l) + 1] = std::cos(f * p[c]);
    }
  }
  return out;
}

Mat positional_encode_rows(const Mat& points, int L) {
  if (L < 0) throw UsageError("positional_encode: negative frequency count");
  const auto dim = points.cols();
  Mat out(points.rows(), 2 * L * dim);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      double f = std::numbers::pi;
      for (int l = 0; l < L; ++l, f *= 2.0) {
        out(r, 2 * (c * L + l)) = std::sin(f * points(r, c));
        out(r, 2 * (c * L + l) + 1) = std::cos(f * points(r, c));
      }
    }
  }
  return out;
}

FieldOutput field_forward(const FieldConfig& cfg, const cond::VarMap& params, ad::Var cond,
                          ad::Var latent, const Mat& enc_x, const Mat& enc_v) {
  using namespace ad;
  if (!cond.valid()) throw UsageError("field_forward: missing conditioning vector");
  Tape& t = *cond.tape();
  if (cond.rows() != cfg.cond_dim || cond.cols() != 1) {
    throw DimensionError("field_forward: conditioning must be " + std::to_string(cfg.cond_dim) + "x1");
  }
  if (cfg.latent_dim > 0 && (!latent.valid() || latent.rows() != cfg.latent_dim || latent.cols() != 1)) {
    throw DimensionError("field_forward: latent must be " + std::to_string(cfg.latent_dim) + "x1");
  }
  if (enc_x.cols() != cfg.enc_x_dim() || enc_v.cols() != cfg.enc_v_dim() || enc_x.rows() != enc_v.rows()) {
    throw DimensionError("field_forward: encoded input widths do not match the configuration");
  }

  Var ex = t.constant(enc_x);
  Var ev = t.constant(enc_v);

  // [gamma(x) ; cond ; l] W == gamma(x) Wx + (cond^T Wc + l^T Wl) broadcast.
  Var h = relu(add_row(matmul(ex, need(params, "l0.Wx")), shared_row(params, "l0", cond, latent, cfg)));
  for (int n = 1; n < cfg.layers; ++n) {
    const std::string name = "l" + std::to_string(n);
    Var pre = matmul(h, need(params, name + ".W"));
    if (cfg.has_skip() && n == FieldConfig::kSkipLayer) {
      pre = add(pre, matmul(ex, need(params, name + ".Wx")));
      pre = add_row(pre, shared_row(params, name, cond, latent, cfg));
    } else {
      pre = add_row(pre, need(params, name + ".b"));
    }
    h = relu(pre);
  }

  Var sigma = softplus(add_row(matmul(h, need(params, "sigma.W")), need(params, "sigma.b")));

  Var c = h;
  for (int n = 0; n < cfg.color_layers; ++n) {
    const std::string name = "color" + std::to_string(n);
    Var pre = matmul(c, need(params, name + ".W"));
    if (n == 0) pre = add(pre, matmul(ev, need(params, name + ".Wv")));
    c = relu(add_row(pre, need(params, name + ".b")));
  }
  Var pre_rgb = matmul(c, need(params, "rgb.W"));
  if (cfg.color_layers == 0) pre_rgb = add(pre_rgb, matmul(ev, need(params, "rgb.Wv")));
  Var rgb = sigmoid(add_row(pre_rgb, need(params, "rgb.b")));
  return {rgb, sigma};
}

PointOutput field_forward(const FieldConfig& cfg, const std::map<std::string, Mat, std::less<>>& params,
                          const Vec& cond, const Vec& latent, const Vec3& x, Vec3 v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw UsageError("field_forward: zero view direction");
  if (std::abs(n - 1.0) > 1e-9) {
    ++g_direction_warnings;
    std::fprintf(stderr, "minerf: warning: non-unit view direction (|v| = %g) normalized\n", n);
    v /= n;
  }
  ad::Tape t;
  cond::VarMap vars;
  for (const auto& [name, value] : params) vars.emplace(name, t.constant(value));
  Mat px = x.transpose();
  Mat pv = v.transpose();
  ad::Var lat = cfg.latent_dim > 0 ? t.constant(latent) : ad::Var{};
  auto out = field_forward(cfg, vars, t.constant(cond), lat, positional_encode_rows(px, cfg.Lx),
                           positional_encode_rows(pv, cfg.Lv));
  return {out.rgb.value().row(0).transpose(), out.sigma.value()(0, 0)};
}

long direction_warnings() { return g_direction_warnings.load(); }

}  // namespace minerf::field

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/conditioning.hpp"

#include <array>
#include <string>
#include <utility>

#include "minerf/errors.hpp"

namespace minerf::cond {

namespace {

constexpr std::array<std::pair<VariantId, std::string_view>, 13> kNames{{
    {VariantId::Baseline, "Baseline"},
    {VariantId::A1, "A1"},
    {VariantId::A2, "A2"},
    {VariantId::A3, "A3"},
    {VariantId::A4, "A4"},
    {VariantId::A5, "A5"},
    {VariantId::A6, "A6"},
    {VariantId::A7, "A7"},
    {VariantId::M, "M"},
    {VariantId::H, "H"},
    {VariantId::HigherOut_o256, "HigherOut_o256"},
    {VariantId::LearnableConcat, "LearnableConcat"},
    {VariantId::LatentInM, "LatentInM"},
}};

ParamShape mat(std::string name, int rows, int cols) {
  return {std::move(name), rows, cols, cols, rows};
}

ad::Var need(const VarMap& params, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("conditioning: missing parameter '" + name + "'");
  const ad::Var v = it->second;
  if (v.rows() != rows || v.cols() != cols) {
    throw ConfigError("conditioning: parameter '" + name + "' is " + std::to_string(v.rows()) +
                      "x" + std::to_string(v.cols()) + ", expected " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  }
  return v;
}

void check_vec(const char* what, ad::Var v, int n) {
  if (v.rows() != n || v.cols() != 1) {
    throw DimensionError(std::string("conditioning: ") + what + " must be " + std::to_string(n) +
                         "x1, got " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
  }
}

std::string level_name(int n, char which) {
  return "U" + std::to_string(n) + (which == 'e' ? "_e" : "_i");
}

}  // namespace

std::string_view to_string(VariantId v) {
  for (const auto& [id, name] : kNames) {
    if (id == v) return name;
  }
  return "?";
}

VariantId variant_from_string(std::string_view name) {
  for (const auto& [id, n] : kNames) {
    if (n == name) return id;
  }
  throw ConfigError("unknown conditioning variant '" + std::string(name) + "'");
}

std::vector<VariantId> all_variants() {
  std::vector<VariantId> out;
  for (const auto& [id, name] : kNames) out.push_back(id);
  return out;
}

int resolved_o(VariantId v, const CondDims& dims) {
  if (dims.o > 0) return dims.o;
  return v == VariantId::HigherOut_o256 ? 256 : dims.d;
}

int output_dim(VariantId v, const CondDims& dims) {
  switch (v) {
    case VariantId::Baseline:
      return 2 * dims.d;
    case VariantId::LearnableConcat:
      return 2 * resolved_o(v, dims);
    default:
      return resolved_o(v, dims);
  }
}

bool field_takes_latent(VariantId v) { return v != VariantId::LatentInM; }

std::vector<ParamShape> param_shapes(VariantId v, const CondDims& dims) {
  const int d = dims.d;
  const int k = dims.k;
  const int o = resolved_o(v, dims);
  if (d <= 0 || k <= 0 || o <= 0 || dims.d_latent < 0) {
    throw ConfigError("conditioning: d, k, o must be positive");
  }
  switch (v) {
    case VariantId::A2:
    case VariantId::A3:
    case VariantId::A4:
      if (o != d) {
        throw ConfigError("conditioning: variant " + std::string(to_string(v)) +
                          " applies e*i without a projection and requires o == d");
      }
      break;
    default:
      break;
  }

  switch (v) {
    case VariantId::Baseline:
      return {};
    case VariantId::A1:
    case VariantId::A2:
    case VariantId::A5:
    case VariantId::LearnableConcat:
      return {mat("W2", o, d), mat("W3", o, d)};
    case VariantId::A3:
    case VariantId::A4:
      return {mat("W1", o, d)};
    case VariantId::A6:
      return {mat("W1", o, d), mat("W2", o, d), mat("W3", o, d)};
    case VariantId::A7:
      // Dense o x d x d tensor stored as its mode-1 unfolding.
      return {{"W", o, d * d, d * d, o}};
    case VariantId::M:
    case VariantId::HigherOut_o256:
      return {mat("U1", k, d), mat("U2", k, d), mat("C", o, k), mat("W2", o, d), mat("W3", o, d)};
    case VariantId::H: {
      if (dims.n_levels < 1) throw ConfigError("conditioning: H needs n_levels >= 1");
      std::vector<ParamShape> out;
      for (int n = 1; n <= dims.n_levels; ++n) {
        out.push_back(mat(level_name(n, 'e'), k, d));
        out.push_back(mat(level_name(n, 'i'), k, d));
      }
      out.push_back(mat("C", o, k));
      return out;
    }
    case VariantId::LatentInM:
      if (dims.d_latent <= 0) throw ConfigError("conditioning: LatentInM needs d_latent > 0");
      return {mat("U1", k, d), mat("U2", k, d), mat("U3", k, dims.d_latent), mat("C", o, k)};
  }
  throw ConfigError("conditioning: unhandled variant");
}

ad::Var variant_forward(VariantId v, const CondDims& dims, const VarMap& params, ad::Var e,
                        ad::Var i, ad::Var l) {
  const int d = dims.d;
  const int k = dims.k;
  const int o = resolved_o(v, dims);
  check_vec("e", e, d);
  check_vec("i", i, d);
  // Validates dims (and the o == d rule) before touching parameters.
  (void)param_shapes(v, dims);

  using namespace ad;
  switch (v) {
    case VariantId::Baseline:
      return concat({e, i});
    case VariantId::A1:
      return matvec(need(params, "W2", o, d), e) + matvec(need(params, "W3", o, d), i);
    case VariantId::A2:
      return mul(e, i) + matvec(need(params, "W2", o, d), e) + matvec(need(params, "W3", o, d), i);
    case VariantId::A3: {
      // One matrix object, reached by three paths.
      Var W1 = need(params, "W1", o, d);
      return matvec(W1, mul(e, i)) + matvec(W1, e) + matvec(W1, i);
    }
    case VariantId::A4:
      return matvec(need(params, "W1", o, d), mul(e, i));
    case VariantId::A5: {
      Var pe = matvec(need(params, "W2", o, d), e);
      Var pi = matvec(need(params, "W3", o, d), i);
      return mul(pe, pi) + pe + pi;
    }
    case VariantId::A6:
      return matvec(need(params, "W1", o, d), mul(e, i)) + matvec(need(params, "W2", o, d), e) +
             matvec(need(params, "W3", o, d), i);
    case VariantId::A7: {
      Var outer = matmul(e, transpose(i));
      return matvec(need(params, "W", o, d * d), reshape(outer, Eigen::Index(d) * d, 1));
    }
    case VariantId::M:
    case VariantId::HigherOut_o256:
      return m_forward({need(params, "U1", k, d), need(params, "U2", k, d), need(params, "C", o, k),
                        need(params, "W2", o, d), need(params, "W3", o, d)},
                       e, i);
    case VariantId::H: {
      HVars hv;
      for (int n = 1; n <= dims.n_levels; ++n) {
        hv.U_e.push_back(need(params, level_name(n, 'e'), k, d));
        hv.U_i.push_back(need(params, level_name(n, 'i'), k, d));
      }
      hv.C = need(params, "C", o, k);
      return h_forward(hv, e, i);
    }
    case VariantId::LearnableConcat:
      return concat({matvec(need(params, "W2", o, d), e), matvec(need(params, "W3", o, d), i)});
    case VariantId::LatentInM: {
      if (!l.valid()) throw UsageError("conditioning: LatentInM needs a latent code");
      check_vec("l", l, dims.d_latent);
      Var a = matvec(need(params, "U1", k, d), e);
      Var b = matvec(need(params, "U2", k, d), i);
      Var c = matvec(need(params, "U3", k, dims.d_latent), l);
      Var ab = mul(a, b);
      Var inner = mul(ab, c) + ab + mul(a, c) + mul(b, c) + a + b + c;
      return matvec(need(params, "C", o, k), inner);
    }
  }
  throw ConfigError("conditioning: unhandled variant");
}

// --- M ----------------------------------------------------------------------

ad::Var m_forward(const MVars& p, ad::Var e, ad::Var i) {
  using namespace ad;
  const auto d = e.rows();
  if (i.rows() != d || e.cols() != 1 || i.cols() != 1) {
    throw DimensionError("m_forward: e and i must be column vectors of equal length");
  }
  if (p.U1.cols() != d || p.U2.cols() != d || p.W2.cols() != d || p.W3.cols() != d ||
      p.U1.rows() != p.U2.rows() || p.C.cols() != p.U1.rows() || p.W2.rows() != p.C.rows() ||
      p.W3.rows() != p.C.rows()) {
    throw DimensionError("m_forward: parameter shapes disagree");
  }
  return matvec(p.C, mul(matvec(p.U1, e), matvec(p.U2, i))) + matvec(p.W2, e) + matvec(p.W3, i);
}

Vec m_forward(const MParams& p, const Vec& e, const Vec& i) {
  ad::Tape t;
  MVars v{t.constant(p.U1), t.constant(p.U2), t.constant(p.C), t.constant(p.W2), t.constant(p.W3)};
  return m_forward(v, t.constant(e), t.constant(i)).value();
}

// --- H ----------------------------------------------------------------------

ad::Var h_forward(const HVars& p, ad::Var e, ad::Var i, HMode mode) {
  using namespace ad;
  const std::size_t n_levels = p.U_e.size();
  if (n_levels < 1 || p.U_i.size() != n_levels) {
    throw DimensionError("h_forward: need N >= 1 levels with both U(n,1) and U(n,2)");
  }
  if (e.rows() != i.rows() || e.cols() != 1 || i.cols() != 1) {
    throw DimensionError("h_forward: e and i must be column vectors of equal length");
  }
  const auto k = p.U_e[0].rows();
  for (std::size_t n = 0; n < n_levels; ++n) {
    if (p.U_e[n].rows() != k || p.U_i[n].rows() != k || p.U_e[n].cols() != e.rows() ||
        p.U_i[n].cols() != i.rows()) {
      throw DimensionError("h_forward: level " + std::to_string(n + 1) + " has mismatched shapes");
    }
  }
  if (p.C.cols() != k) throw DimensionError("h_forward: C must have k columns");

  Var x = matvec(p.U_e[0], e) + matvec(p.U_i[0], i);
  for (std::size_t n = 1; n < n_levels; ++n) {
    Var a = matvec(p.U_e[n], e) + matvec(p.U_i[n], i);
    x = mode == HMode::Full ? x + mul(a, x) : mul(a, x);
  }
  return matvec(p.C, x);
}

Vec h_forward(const HParams& p, const Vec& e, const Vec& i, HMode mode) {
  ad::Tape t;
  HVars v;
  for (const Mat& u : p.U_e) v.U_e.push_back(t.constant(u));
  for (const Mat& u : p.U_i) v.U_i.push_back(t.constant(u));
  v.C = t.constant(p.C);
  return h_forward(v, t.constant(e), t.constant(i), mode).value();
}

Vec h_expand_oracle(const HParams& p, const Vec& e, const Vec& i, HMode mode) {
  const int n_levels = p.degree();
  if (n_levels != 2 && n_levels != 3) {
    throw UnsupportedError("h_expand_oracle: only N = 2 or 3 is expanded, got " +
                           std::to_string(n_levels));
  }
  if (static_cast<int>(p.U_i.size()) != n_levels) {
    throw DimensionError("h_expand_oracle: U(n,1) and U(n,2) counts differ");
  }
  // Single projections: proj[n][0] = U(n,1) e, proj[n][1] = U(n,2) i.
  std::vector<std::array<Vec, 2>> proj;
  for (int n = 0; n < n_levels; ++n) {
    if (p.U_e[n].cols() != e.size() || p.U_i[n].cols() != i.size()) {
      throw DimensionError("h_expand_oracle: projection shapes disagree with e, i");
    }
    proj.push_back({p.U_e[n] * e, p.U_i[n] * i});
  }
  const auto k = proj[0][0].size();
  if (p.C.cols() != k) throw DimensionError("h_expand_oracle: C must have k columns");

  // x_N = a_1 * prod_{n>=2} (1 + a_n) in Full mode, prod_n a_n otherwise.
  // Every subset S of levels {2..N} that appears in the product contributes
  // a_1 * prod_{n in S} a_n; each a_n is then split into its e and i halves.
  Vec out = Vec::Zero(p.C.rows());
  const unsigned higher = static_cast<unsigned>(n_levels - 1);
  for (unsigned subset = 0; subset < (1u << higher); ++subset) {
    if (mode == HMode::MultiplicativeOnly && subset != (1u << higher) - 1) continue;
    std::vector<int> levels{0};
    for (unsigned b = 0; b < higher; ++b) {
      if (subset & (1u << b)) levels.push_back(static_cast<int>(b) + 1);
    }
    const unsigned n_terms = 1u << levels.size();
    for (unsigned choice = 0; choice < n_terms; ++choice) {
      Vec term = Vec::Ones(k);
      for (std::size_t j = 0; j < levels.size(); ++j) {
        term = term.cwiseProduct(proj[levels[j]][(choice >> j) & 1u]);
      }
      out += p.C * term;
    }
  }
  return out;
}

}  // namespace minerf::cond

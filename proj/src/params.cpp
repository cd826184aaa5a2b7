// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/params.hpp"

#include <cmath>

#include "minerf/errors.hpp"
#include "minerf/rng.hpp"

namespace minerf {

Param& ParamStore::add(std::string name, Mat value) {
  if (index_.contains(name)) throw UsageError("ParamStore: duplicate parameter '" + name + "'");
  index_.emplace(name, params_.size());
  Param p;
  p.adam_m = Mat::Zero(value.rows(), value.cols());
  p.adam_v = Mat::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  p.name = std::move(name);
  params_.push_back(std::move(p));
  return params_.back();
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

Param& ParamStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw UsageError("ParamStore: no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Param& ParamStore::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw UsageError("ParamStore: no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

std::vector<std::string> ParamStore::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (p.name.starts_with(prefix)) out.push_back(p.name);
  }
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

Mat xavier_uniform(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Mat m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-bound, bound);
  return m;
}

}  // namespace minerf

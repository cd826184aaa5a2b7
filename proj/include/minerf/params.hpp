// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "minerf/linalg.hpp"

namespace minerf {

/// A learnable tensor plus its Adam state. Each parameter keeps its own step
/// counter so that sparsely touched codes get correct bias correction.
struct Param {
  std::string name;
  Mat value;
  Mat adam_m;
  Mat adam_v;
  std::int64_t adam_t = 0;
};

/// Insertion-ordered collection of named parameters.
class ParamStore {
 public:
  Param& add(std::string name, Mat value);

  bool contains(std::string_view name) const;
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Names starting with prefix, in insertion order.
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;

  std::size_t scalar_count() const;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
class Rng;
Mat xavier_uniform(int rows, int cols, int fan_in, int fan_out, Rng& rng);

}  // namespace minerf

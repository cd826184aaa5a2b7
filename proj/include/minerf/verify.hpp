// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Built-in oracle suites behind `minerf verify`: randomized comparisons of
// the factored modules against dense expansions, finite-difference checks
// of the autodiff primitives, and quadrature checks of the compositor.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace minerf::verify {

struct Check {
  std::string name;
  bool pass = false;
  double max_dev = 0.0;
  double tol = 0.0;
  long cases = 0;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool pass() const;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  int cases = 200;
  /// Flips a sign inside the mixed-product check to confirm it can fail.
  bool inject_sign_fault = false;
};

std::vector<std::string> suite_names();
/// Throws UsageError for an unknown suite.
SuiteResult run_suite(std::string_view name, const VerifyOptions& opts = {});

nlohmann::json to_json(const SuiteResult& r);

}  // namespace minerf::verify

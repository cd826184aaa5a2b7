// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: one strict JSON document with sections scene,
// conditioning, field, render, train, eval, plus the master seed. Unknown
// keys are rejected and every default is materialized on output.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minerf/conditioning.hpp"
#include "minerf/synthscene.hpp"

namespace minerf {

struct ConditioningConfig {
  cond::VariantId variant = cond::VariantId::M;
  cond::CondDims dims;
};

struct FieldSection {
  int layers = 4;
  int hidden = 64;
  int Lx = 6;
  int Lv = 2;
  int color_layers = 2;
  int color_hidden = 32;
};

struct RenderConfig {
  int n_coarse = 16;
  int n_fine = 32;
  int threads = 1;
};

struct TrainConfig {
  int steps = 3000;
  int rays = 256;
  double lr_start = 5e-4;
  double lr_end = 5e-5;
  double lambda_l = 0.01;
  double lambda_i = 1e-4;
  bool squared_reg = false;
  double in_box_fraction = 0.95;
  int log_every = 25;
  int test_every = 500;
  bool deterministic = true;
  double divergence_factor = 10.0;
  double personalize_lr = 1e-5;
  int personalize_steps = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalConfig {
  bool transfer = true;
  int ssim_window = 8;
};

struct RunConfig {
  scene::SceneConfig scene;
  ConditioningConfig conditioning;
  FieldSection field;
  RenderConfig render;
  TrainConfig train;
  EvalConfig eval;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Strict parse. Missing keys take defaults; section seeds default to the
/// master seed. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

/// Applies "section.key=value" overrides to a JSON document. The value is
/// parsed as JSON, falling back to a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads the file (or starts from defaults when path is empty), applies the
/// overrides, and falls back to MINERF_SEED when no seed was given.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides = {});

}  // namespace minerf

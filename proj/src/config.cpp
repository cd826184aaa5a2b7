// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "minerf/errors.hpp"

namespace minerf {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, const json& defaults, const std::string& where) {
  if (!section.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : section.items()) {
    if (!defaults.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw ConfigError(where + "." + key + ": " + ex.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train.steps must be >= 0");
  if (rays < 1) throw ConfigError("train.rays must be >= 1");
  if (!(lr_start > 0.0) || !(lr_end > 0.0) || !(lr_end < lr_start)) {
    throw ConfigError("train: need 0 < lr_end < lr_start");
  }
  if (lambda_l < 0.0 || lambda_i < 0.0) throw ConfigError("train: lambda values must be nonnegative");
  if (!(in_box_fraction >= 0.0 && in_box_fraction <= 1.0)) throw ConfigError("train.in_box_fraction must be in [0,1]");
  if (log_every < 1 || test_every < 0) throw ConfigError("train: log_every >= 1, test_every >= 0");
  if (!(personalize_lr > 0.0) || personalize_steps < 0) throw ConfigError("train: invalid personalization settings");
}

void RunConfig::validate() const {
  scene.validate();
  train.validate();
  if (conditioning.dims.d != scene.d) {
    throw ConfigError("conditioning.d (" + std::to_string(conditioning.dims.d) +
                      ") must equal scene.d (" + std::to_string(scene.d) + ")");
  }
  (void)cond::param_shapes(conditioning.variant, conditioning.dims);
  if (field.layers < 1 || field.hidden < 1 || field.Lx < 0 || field.Lv < 0 || field.color_layers < 0 ||
      field.color_hidden < 1) {
    throw ConfigError("field: invalid architecture");
  }
  if (render.n_coarse < 1 || render.n_fine < 0 || render.threads < 1) {
    throw ConfigError("render: n_coarse >= 1, n_fine >= 0, threads >= 1");
  }
  if (eval.ssim_window < 1) throw ConfigError("eval.ssim_window must be >= 1");
}

json to_json(const RunConfig& c) {
  const auto& d = c.conditioning.dims;
  return json{
      {"scene", scene::to_json(c.scene)},
      {"conditioning",
       {{"variant", std::string(cond::to_string(c.conditioning.variant))},
        {"d", d.d},
        {"k", d.k},
        {"o", d.o},
        {"n_levels", d.n_levels},
        {"d_latent", d.d_latent}}},
      {"field",
       {{"layers", c.field.layers},
        {"hidden", c.field.hidden},
        {"Lx", c.field.Lx},
        {"Lv", c.field.Lv},
        {"color_layers", c.field.color_layers},
        {"color_hidden", c.field.color_hidden}}},
      {"render", {{"n_coarse", c.render.n_coarse}, {"n_fine", c.render.n_fine}, {"threads", c.render.threads}}},
      {"train",
       {{"steps", c.train.steps},
        {"rays", c.train.rays},
        {"lr_start", c.train.lr_start},
        {"lr_end", c.train.lr_end},
        {"lambda_l", c.train.lambda_l},
        {"lambda_i", c.train.lambda_i},
        {"squared_reg", c.train.squared_reg},
        {"in_box_fraction", c.train.in_box_fraction},
        {"log_every", c.train.log_every},
        {"test_every", c.train.test_every},
        {"deterministic", c.train.deterministic},
        {"divergence_factor", c.train.divergence_factor},
        {"personalize_lr", c.train.personalize_lr},
        {"personalize_steps", c.train.personalize_steps},
        {"seed", c.train.seed}}},
      {"eval", {{"transfer", c.eval.transfer}, {"ssim_window", c.eval.ssim_window}}},
      {"seed", c.seed},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  const json defaults = to_json(c);
  reject_unknown(j, defaults, "config");

  read(j, "seed", c.seed, "config");
  c.scene.seed = c.seed;
  c.train.seed = c.seed;

  if (j.contains("scene")) {
    json s = j.at("scene");
    reject_unknown(s, defaults.at("scene"), "scene");
    if (!s.contains("seed")) s["seed"] = c.seed;
    c.scene = scene::scene_config_from_json(s);
  }
  c.conditioning.dims.d = c.scene.d;
  if (j.contains("conditioning")) {
    const auto& s = j.at("conditioning");
    reject_unknown(s, defaults.at("conditioning"), "conditioning");
    std::string variant(cond::to_string(c.conditioning.variant));
    read(s, "variant", variant, "conditioning");
    c.conditioning.variant = cond::variant_from_string(variant);
    read(s, "d", c.conditioning.dims.d, "conditioning");
    read(s, "k", c.conditioning.dims.k, "conditioning");
    read(s, "o", c.conditioning.dims.o, "conditioning");
    read(s, "n_levels", c.conditioning.dims.n_levels, "conditioning");
    read(s, "d_latent", c.conditioning.dims.d_latent, "conditioning");
  }
  if (j.contains("field")) {
    const auto& s = j.at("field");
    reject_unknown(s, defaults.at("field"), "field");
    read(s, "layers", c.field.layers, "field");
    read(s, "hidden", c.field.hidden, "field");
    read(s, "Lx", c.field.Lx, "field");
    read(s, "Lv", c.field.Lv, "field");
    read(s, "color_layers", c.field.color_layers, "field");
    read(s, "color_hidden", c.field.color_hidden, "field");
  }
  if (j.contains("render")) {
    const auto& s = j.at("render");
    reject_unknown(s, defaults.at("render"), "render");
    read(s, "n_coarse", c.render.n_coarse, "render");
    read(s, "n_fine", c.render.n_fine, "render");
    read(s, "threads", c.render.threads, "render");
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    reject_unknown(s, defaults.at("train"), "train");
    read(s, "steps", c.train.steps, "train");
    read(s, "rays", c.train.rays, "train");
    read(s, "lr_start", c.train.lr_start, "train");
    read(s, "lr_end", c.train.lr_end, "train");
    read(s, "lambda_l", c.train.lambda_l, "train");
    read(s, "lambda_i", c.train.lambda_i, "train");
    read(s, "squared_reg", c.train.squared_reg, "train");
    read(s, "in_box_fraction", c.train.in_box_fraction, "train");
    read(s, "log_every", c.train.log_every, "train");
    read(s, "test_every", c.train.test_every, "train");
    read(s, "deterministic", c.train.deterministic, "train");
    read(s, "divergence_factor", c.train.divergence_factor, "train");
    read(s, "personalize_lr", c.train.personalize_lr, "train");
    read(s, "personalize_steps", c.train.personalize_steps, "train");
    read(s, "seed", c.train.seed, "train");
  }
  if (j.contains("eval")) {
    const auto& s = j.at("eval");
    reject_unknown(s, defaults.at("eval"), "eval");
    read(s, "transfer", c.eval.transfer, "eval");
    read(s, "ssim_window", c.eval.ssim_window, "eval");
  }
  c.validate();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
    start = dot + 1;
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (path) {
    std::ifstream f(*path);
    if (!f) throw ConfigError("cannot read config " + path->string());
    try {
      doc = json::parse(f, nullptr, true, /*ignore_comments=*/false);
    } catch (const json::exception& ex) {
      throw ConfigError("config " + path->string() + ": " + ex.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (!doc.contains("seed")) {
    if (const char* env = std::getenv("MINERF_SEED"); env != nullptr && *env != '\0') {
      try {
        doc["seed"] = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("MINERF_SEED is not an integer: ") + env);
      }
    }
  }
  return config_from_json(doc);
}

}  // namespace minerf

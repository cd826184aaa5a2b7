// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
//
// minerf: dataset generation, training, rendering, transfer,
// personalization, evaluation and oracle checks.
//
// Exit codes: 0 ok, 2 configuration or usage error, 3 numeric divergence,
// 4 verification failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "minerf/checkpoint.hpp"
#include "minerf/config.hpp"
#include "minerf/errors.hpp"
#include "minerf/metrics.hpp"
#include "minerf/runtime.hpp"
#include "minerf/trainer.hpp"
#include "minerf/verify.hpp"

namespace fs = std::filesystem;
using namespace minerf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerify = 4;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  int threads = 0;
};

RunConfig run_config(const Common& c, std::vector<std::string> extra = {}) {
  std::vector<std::string> sets = c.sets;
  sets.insert(sets.end(), extra.begin(), extra.end());
  if (c.threads > 0) sets.push_back("render.threads=" + std::to_string(c.threads));
  std::optional<fs::path> path;
  if (!c.config.empty()) path = c.config;
  return load_config(path, sets);
}

/// "all", "3", "0-9" or "1,4,7".
std::vector<int> parse_frames(const std::string& spec, int n_frames) {
  std::vector<int> out;
  if (spec.empty() || spec == "all") {
    for (int f = 0; f < n_frames; ++f) out.push_back(f);
    return out;
  }
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoi(part));
      } else {
        const int a = std::stoi(part.substr(0, dash));
        const int b = std::stoi(part.substr(dash + 1));
        for (int f = a; f <= b; ++f) out.push_back(f);
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad frame list '" + spec + "'");
    }
  }
  for (int f : out) {
    if (f < 0 || f >= n_frames) throw UsageError("frame " + std::to_string(f) + " out of range");
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int cmd_gen_data(const Common& c, const std::string& out) {
  const RunConfig cfg = run_config(c);
  const auto data = scene::make_dataset(cfg.scene, true, cfg.render.threads);
  const auto checksum = scene::save_dataset(data, out);
  std::cout << "identities " << data.identities.size() << " frames " << data.frame_count() << " checksum "
            << hex64(checksum) << '\n';
  return kExitOk;
}

int cmd_train(const Common& c, const std::string& data_dir, const std::string& out, bool deterministic,
              std::optional<int> steps) {
  std::vector<std::string> extra;
  if (deterministic) extra.push_back("train.deterministic=true");
  if (steps) extra.push_back("train.steps=" + std::to_string(*steps));
  RunConfig cfg = run_config(c, extra);
  const auto data = scene::load_dataset(data_dir);
  // The dataset on disk is authoritative for the scene section.
  cfg.scene = data.config;
  cfg.validate();
  train::TrainHooks hooks;
  hooks.on_log = [](const train::LogRow& r) {
    std::cout << "step " << r.step << " loss_c " << r.loss_c << " lr " << r.lr;
    if (!std::isnan(r.test_psnr)) std::cout << " test_psnr " << metrics::format_psnr(r.test_psnr);
    std::cout << '\n' << std::flush;
  };
  fs::create_directories(out);
  const auto res = train::train(data, cfg, hooks);
  save_checkpoint(res.ckpt, fs::path(out) / "checkpoint.bin");
  train::write_metrics_csv(res.log, fs::path(out) / "metrics.csv");
  std::cout << "wrote " << (fs::path(out) / "checkpoint.bin").string() << '\n';
  return kExitOk;
}

int cmd_transfer(const Common& c, const std::string& ckpt_path, const std::string& identity,
                 const std::string& expr_from, const std::string& frames, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const int target = ckpt.model.find_identity(identity);
  if (target < 0) throw UsageError("unknown identity '" + identity + "'");
  const std::string source_name = expr_from.empty() ? identity : expr_from;
  // Trajectories and cameras are regenerated from the config snapshot.
  const auto traj = scene::make_dataset(ckpt.config.scene, false);
  const int source = traj.find_identity(source_name);
  if (source < 0 || ckpt.model.find_identity(source_name) < 0) {
    throw UsageError("unknown identity '" + source_name + "'");
  }
  const auto& src = traj.identities[static_cast<std::size_t>(source)];
  const int threads = c.threads > 0 ? c.threads : ckpt.config.render.threads;
  fs::create_directories(out);
  for (int f : parse_frames(frames, static_cast<int>(src.frames.size()))) {
    const auto& fr = src.frames[static_cast<std::size_t>(f)];
    const Vec latent = source_name == identity ? ckpt.model.latent(target, f) : ckpt.model.mean_latent(target);
    const Image img = metrics::render_frame(ckpt, target, fr.expression, latent, fr.pose, threads);
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.ppm", f);
    write_ppm(fs::path(out) / name, img);
  }
  return kExitOk;
}

int cmd_personalize(const Common& c, const std::string& ckpt_path, const std::string& data_dir,
                    const std::string& identity, std::optional<int> steps, int clip_frames, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto data = scene::load_dataset(data_dir);
  const int j = data.find_identity(identity);
  if (j < 0) throw UsageError("unknown identity '" + identity + "' in dataset");
  scene::IdentityData clip = data.identities[static_cast<std::size_t>(j)];
  if (clip_frames > 0 && clip_frames < static_cast<int>(clip.frames.size())) {
    clip.frames.resize(static_cast<std::size_t>(clip_frames));
    clip.n_test = scene::test_count(clip_frames, data.config.test_fraction);
  }
  train::PersonalizeOptions opts;
  opts.steps = steps.value_or(ckpt.config.train.personalize_steps);
  opts.lr = ckpt.config.train.personalize_lr;
  Checkpoint work = ckpt;
  if (c.threads > 0) work.config.render.threads = c.threads;
  auto res = train::personalize(work, clip, opts);
  res.ckpt.config.render.threads = ckpt.config.render.threads;
  save_checkpoint(res.ckpt, out);
  std::cout << (res.unseen ? "unseen" : "seen") << " identity " << identity << " psnr_before "
            << metrics::format_psnr(res.psnr_before) << " psnr_after " << metrics::format_psnr(res.psnr_after)
            << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& suite, bool inject, int cases, std::uint64_t seed) {
  verify::VerifyOptions opts;
  opts.inject_sign_fault = inject;
  opts.cases = cases;
  opts.seed = seed;
  std::vector<std::string> names = suite == "all" ? verify::suite_names() : std::vector<std::string>{suite};
  nlohmann::json out = nlohmann::json::array();
  bool pass = true;
  for (const auto& n : names) {
    const auto r = verify::run_suite(n, opts);
    pass = pass && r.pass();
    out.push_back(verify::to_json(r));
  }
  nlohmann::json doc = {{"pass", pass}, {"suites", out}};
  std::cout << doc.dump(2) << '\n';
  return pass ? kExitOk : kExitVerify;
}

int cmd_eval(const Common& c, const std::string& ckpt_path, const std::string& data_dir,
             const std::string& frames_dir, const std::string& out, bool no_transfer) {
  const auto data = scene::load_dataset(data_dir);
  if (!frames_dir.empty()) {
    // Image directory laid out like a dataset, compared frame by frame.
    metrics::EvalReport rep;
    rep.variant = "images";
    double ps = 0.0;
    bool inf = false;
    for (const auto& id : data.identities) {
      rep.identities.push_back(id.name);
      for (const auto& fr : id.frames) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.ppm", fr.index);
        const Image img = read_ppm(fs::path(frames_dir) / id.name / name);
        const metrics::FrameScore s{id.name, fr.index, metrics::psnr(img, fr.image), metrics::ssim(img, fr.image)};
        if (std::isinf(s.psnr)) inf = true; else ps += s.psnr;
        rep.mean_ssim += s.ssim;
        rep.frames.push_back(s);
      }
    }
    if (rep.frames.empty()) throw UsageError("eval: no frames");
    rep.mean_psnr = inf ? metrics::kInfinitePsnr : ps / static_cast<double>(rep.frames.size());
    rep.mean_ssim /= static_cast<double>(rep.frames.size());
    metrics::write_report(rep, out);
    std::cout << "mean_psnr " << metrics::format_psnr(rep.mean_psnr) << " mean_ssim " << rep.mean_ssim << '\n';
    return kExitOk;
  }
  if (ckpt_path.empty()) throw UsageError("eval: --ckpt or --frames-dir required");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const int threads = c.threads > 0 ? c.threads : ckpt.config.render.threads;
  const auto rep = metrics::evaluate(ckpt, data, ckpt.config.eval.transfer && !no_transfer,
                                     ckpt.config.eval.ssim_window, threads);
  metrics::write_report(rep, out);
  std::cout << "variant " << rep.variant << " mean_psnr " << metrics::format_psnr(rep.mean_psnr) << " mean_ssim "
            << rep.mean_ssim << '\n';
  return kExitOk;
}

int cmd_inspect(const std::string& ckpt_path, const std::string& matrix, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  std::string name = matrix;
  if (!ckpt.model.params.contains(name)) name = "cond." + matrix;
  if (!ckpt.model.params.contains(name)) throw UsageError("no matrix '" + matrix + "' in checkpoint");
  const Vec s = metrics::singular_values(ckpt.model.params.at(name).value);
  if (!out.empty()) metrics::write_singular_values_csv(s, out);
  std::cout << name << " singular values:";
  std::cout.precision(10);
  for (Eigen::Index k = 0; k < s.size(); ++k) std::cout << ' ' << s[k];
  std::cout << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"minerf: multi-identity conditioned radiance fields"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON run configuration");
    sub->add_option("--set", common.sets, "Override a config key, e.g. train.steps=100")->take_all();
    sub->add_option("--threads", common.threads, "Worker cap for rendering");
  };

  std::string out, data_dir, ckpt, identity, expr_from, frames = "all", suite = "all", matrix, frames_dir;
  bool deterministic = false, inject = false, no_transfer = false;
  std::optional<int> steps;
  int cases = 200;
  int clip_frames = 0;
  std::uint64_t verify_seed = 7;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  add_common(gen);
  gen->add_option("--out", out, "Output directory")->required();

  auto* trn = app.add_subcommand("train", "Train a model");
  add_common(trn);
  trn->add_option("--data", data_dir, "Dataset directory")->required();
  trn->add_option("--out", out, "Output directory")->required();
  trn->add_flag("--deterministic", deterministic, "Deterministic mode");
  trn->add_option("--steps", steps, "Shorthand for --set train.steps=N");

  auto* ren = app.add_subcommand("render", "Render frames of one identity");
  add_common(ren);
  ren->add_option("--ckpt", ckpt)->required();
  ren->add_option("--identity", identity)->required();
  ren->add_option("--frames", frames, "all, N, A-B or a comma list");
  ren->add_option("--out", out)->required();

  auto* tra = app.add_subcommand("transfer", "Render an identity with another identity's expressions");
  add_common(tra);
  tra->add_option("--ckpt", ckpt)->required();
  tra->add_option("--identity", identity)->required();
  tra->add_option("--expr-from", expr_from)->required();
  tra->add_option("--frames", frames);
  tra->add_option("--out", out)->required();

  auto* per = app.add_subcommand("personalize", "Fine-tune on one identity with the module frozen");
  add_common(per);
  per->add_option("--ckpt", ckpt)->required();
  per->add_option("--data", data_dir)->required();
  per->add_option("--identity", identity)->required();
  per->add_option("--steps", steps);
  per->add_option("--clip-frames", clip_frames, "Use only the first N frames");
  per->add_option("--out", out, "Output checkpoint")->required();

  auto* ver = app.add_subcommand("verify", "Run oracle suites");
  ver->add_option("--suite", suite, "tensor, autodiff, render, props or all");
  ver->add_flag("--inject-sign-fault", inject, "Corrupt the mixed-product check");
  ver->add_option("--cases", cases, "Random cases per check");
  ver->add_option("--seed", verify_seed);

  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint or an image directory");
  add_common(evl);
  evl->add_option("--ckpt", ckpt);
  evl->add_option("--data", data_dir)->required();
  evl->add_option("--frames-dir", frames_dir, "Compare PPM frames instead of a checkpoint");
  evl->add_option("--out", out)->required();
  evl->add_flag("--no-transfer", no_transfer);

  auto* ins = app.add_subcommand("inspect", "Singular values of a learned matrix");
  ins->add_option("--ckpt", ckpt)->required();
  ins->add_option("--matrix", matrix)->required();
  ins->add_option("--out", out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common, out);
    if (trn->parsed()) return cmd_train(common, data_dir, out, deterministic, steps);
    if (ren->parsed()) return cmd_transfer(common, ckpt, identity, "", frames, out);
    if (tra->parsed()) return cmd_transfer(common, ckpt, identity, expr_from, frames, out);
    if (per->parsed()) return cmd_personalize(common, ckpt, data_dir, identity, steps, clip_frames, out);
    if (ver->parsed()) return cmd_verify(suite, inject, cases, verify_seed);
    if (evl->parsed()) return cmd_eval(common, ckpt, data_dir, frames_dir, out, no_transfer);
    if (ins->parsed()) return cmd_inspect(ckpt, matrix, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}

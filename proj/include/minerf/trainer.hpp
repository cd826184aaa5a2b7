// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Joint optimization of both fields, the conditioning module, identity
// codes and per-frame latents:
//     L = sum_rays |C_coarse - C|^2 + |C_fine - C|^2 + l_l |l| + l_i |i|
// with Adam and an exponentially decaying learning rate. Each step draws
// one (identity, frame) pair, so only that pair's codes move.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minerf/autodiff.hpp"
#include "minerf/checkpoint.hpp"
#include "minerf/synthscene.hpp"

namespace minerf::train {

/// lr0 * (lr1 / lr0)^(step / total); total == 0 yields lr0.
double lr_schedule(std::int64_t step, std::int64_t total, double lr0, double lr1);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update; `t` is the 1-based index of this update.
void adam_step(Mat& value, const Mat& grad, Mat& m, Mat& v, std::int64_t t, double lr,
               const AdamHyper& h = {});
/// Same on a stored parameter; advances its step counter.
void adam_step(Param& p, const Mat& grad, double lr, const AdamHyper& h = {});

struct LossTerms {
  ad::Var total;
  double color = 0.0;     // L_c
  double latent = 0.0;    // |l|
  double identity = 0.0;  // |i|
};

/// `preds` are R x 3 color predictions (coarse and fine) against the same
/// R x 3 targets. An invalid l or i contributes nothing.
LossTerms loss(std::span<const ad::Var> preds, const Mat& target, ad::Var l, ad::Var i, double lambda_l,
               double lambda_i, bool squared = false);

/// Rays and targets of one step, fixed before any network evaluation.
struct StepPlan {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  int identity = 0;  // model index
  int frame = 0;
  Vec expression;
  std::vector<render::Ray> rays;               // rays hitting the scene cube
  std::vector<int> pixels;                     // pixel index of each hit ray
  Mat targets;                                 // hit rays x 3
  std::vector<std::vector<double>> coarse_t;   // per hit ray
  double miss_loss = 0.0;                      // squared error of background-only rays (x2)
};

/// Draws identity, frame and rays for a step from the training frames of
/// `pool`; identities are matched to the checkpoint by name. About
/// in_box_fraction of the rays come from the frame's head box.
StepPlan plan_step(const Checkpoint& ckpt, std::span<const scene::IdentityData* const> pool,
                   std::int64_t step, std::uint64_t seed);

struct StepLoss {
  LossTerms terms;
  ad::Var id_code;
  ad::Var latent;
  TapeParams net;
  std::vector<std::vector<double>> fine_t;
};

/// Builds the step loss on `tape`. Parameters named in `overrides` use the
/// given Vars; with `fixed_fine_t` the fine pass skips resampling.
StepLoss step_loss(ad::Tape& tape, const Checkpoint& ckpt, const StepPlan& plan, bool trainable,
                   const cond::VarMap* overrides = nullptr,
                   const std::vector<std::vector<double>>* fixed_fine_t = nullptr);

struct StepStats {
  double loss_c = 0.0;
  double loss_l = 0.0;
  double loss_i = 0.0;
  double lr = 0.0;
};

/// One optimizer step at learning rate `lr`. Parameters whose name starts
/// with one of `frozen_prefixes` are left untouched.
StepStats train_step(Checkpoint& ckpt, const StepPlan& plan, double lr,
                     const std::vector<std::string>& frozen_prefixes = {});

struct LogRow {
  std::int64_t step = 0;
  double loss_c = 0.0;
  double loss_l = 0.0;
  double loss_i = 0.0;
  double lr = 0.0;
  double test_psnr = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHooks {
  std::function<void(const LogRow&)> on_log;
};

struct TrainResult {
  Checkpoint ckpt;
  std::vector<LogRow> log;
  std::vector<double> loss_history;  // L_c per step
  double final_test_psnr = std::numeric_limits<double>::quiet_NaN();
};

/// Trains from a fresh initialization for config.train.steps steps.
/// Throws NumericError on a non-finite loss or when L_c exceeds
/// divergence_factor times its value at step 100.
TrainResult train(const scene::Dataset& data, const RunConfig& config, const TrainHooks& hooks = {});

void write_metrics_csv(const std::vector<LogRow>& rows, const std::filesystem::path& path);

struct PersonalizeOptions {
  int steps = 200;
  double lr = 1e-5;
};

struct PersonalizeResult {
  Checkpoint ckpt;
  int identity = 0;
  bool unseen = false;
  double psnr_before = 0.0;  // mean over the clip frames
  double psnr_after = 0.0;
};

/// Fine-tunes on `clip` with the conditioning module frozen. A clip whose
/// name is not in the checkpoint gets a fresh identity code and latents.
PersonalizeResult personalize(const Checkpoint& ckpt, const scene::IdentityData& clip,
                              const PersonalizeOptions& opts);

/// Mean PSNR of the model over every frame of the clip.
double clip_psnr(const Checkpoint& ckpt, int identity, const scene::IdentityData& clip);

}  // namespace minerf::train

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Image metrics, singular values of learned maps, and evaluation of a
// trained model against the analytic scenes.

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minerf/checkpoint.hpp"
#include "minerf/image.hpp"
#include "minerf/linalg.hpp"
#include "minerf/synthscene.hpp"

namespace minerf::metrics {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// Mean squared error over all pixels and channels.
double mse(const Image& a, const Image& b);
/// 10 log10(max^2 / MSE); +infinity for identical images.
double psnr(const Image& a, const Image& b, double max_val = 1.0);

/// 0.299 R + 0.587 G + 0.114 B, as a height x width matrix.
Mat luma(const Image& img);
/// Mean SSIM over every window x window patch (uniform weights, stride 1).
double ssim(const Mat& a, const Mat& b, int window = 8, double max_val = 1.0);
double ssim(const Image& a, const Image& b, int window = 8, double max_val = 1.0);

/// One-sided Jacobi; descending, length min(m, n).
Vec singular_values(const Mat& W, double tol = 1e-10, int max_sweeps = 100);

struct FrameScore {
  std::string identity;
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::string variant;
  std::vector<FrameScore> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<std::string> identities;
  /// transfer[j][i] = PSNR of identity i driven by identity j's expressions.
  std::vector<std::vector<double>> transfer;
};

/// Hierarchical render with the checkpoint's sample counts and background.
Image render_frame(const Checkpoint& ckpt, int target, const Vec& expression, const Vec& latent,
                   const render::CameraPose& pose, int threads = 1);

/// Mean PSNR over the held-out frames of every identity.
double test_psnr(const Checkpoint& ckpt, const scene::Dataset& data, int threads = 1);

/// Identity `target` rendered with the expressions and cameras of the held-out
/// frames of `source`, against the analytic ground truth of `target`.
/// Identities are dataset names; unknown names throw UsageError.
double transfer_eval(const Checkpoint& ckpt, const scene::Dataset& data, const std::string& source,
                     const std::string& target, int threads = 1);

EvalReport evaluate(const Checkpoint& ckpt, const scene::Dataset& data, bool with_transfer, int ssim_window = 8,
                    int threads = 1);

nlohmann::json to_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& dir);
void write_singular_values_csv(const Vec& s, const std::filesystem::path& path);

/// Formats a PSNR value, writing "inf" for the sentinel.
std::string format_psnr(double v);

}  // namespace minerf::metrics

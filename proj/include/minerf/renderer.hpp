// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pinhole rays, stratified and hierarchical sampling along them, and the
// alpha-compositing quadrature
//     alpha_i = 1 - exp(-sigma_i delta_i),  T_i = prod_{j<i} (1 - alpha_j),
//     C = sum_i T_i alpha_i c_i + T_end * background.

#include <functional>
#include <optional>
#include <vector>

#include "minerf/autodiff.hpp"
#include "minerf/image.hpp"
#include "minerf/linalg.hpp"
#include "minerf/rng.hpp"

namespace minerf::render {

struct Intrinsics {
  double focal = 38.4;  // pixels
  double cx = 16.0;     // principal point, pixel units (pixel centers at +0.5)
  double cy = 16.0;
  int width = 32;
  int height = 32;
};

/// Camera-to-world transform. The camera looks down its local -z axis with
/// +y up; t is the camera center.
struct CameraPose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Intrinsics K;

  /// Throws UsageError unless R is a proper rotation (1e-9).
  void validate() const;
};

/// Yaw about +y, then pitch about +x, camera placed at distance `radius`
/// from the origin looking at it.
CameraPose orbit_pose(double yaw, double pitch, double radius, const Intrinsics& K);

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
  double t_near = 0.0;
  double t_far = 1.0;
};

struct Pixel {
  int row;
  int col;
};

/// Ray through the pixel center. Throws UsageError for out-of-bounds pixels.
Ray rays_from_camera(const CameraPose& pose, Pixel px, double t_near = 0.0, double t_far = 1.0);

/// Restricts the ray to the cube [-half_extent, half_extent]^3; nullopt on a
/// miss or a segment shorter than 1e-9.
std::optional<Ray> clip_to_bounds(const Ray& ray, double half_extent = 1.0);

/// One t per equal-width bin of [t_near, t_far]: the bin center, or uniform
/// within the bin when jitter is set.
std::vector<double> stratified_samples(const Ray& ray, int n, bool jitter, Rng& rng);

/// Inverse-transform samples from the piecewise-constant density over the
/// coarse bins (edges at t_near, midpoints between coarse samples, t_far)
/// with mass proportional to `weights`. With rng == nullptr the quantiles
/// are taken at (j + 0.5) / n_fine. All-zero weights fall back to uniform
/// mass. Returns the sorted union of coarse and fine t-values.
std::vector<double> hierarchical_resample(const std::vector<double>& coarse_t,
                                          const std::vector<double>& weights, double t_near,
                                          double t_far, int n_fine, Rng* rng);

/// Fine t-values only (not merged), same sampling rule.
std::vector<double> sample_pdf(const std::vector<double>& coarse_t, const std::vector<double>& weights,
                               double t_near, double t_far, int n_fine, Rng* rng);

struct SampleSet {
  std::vector<double> t;  // nondecreasing
  std::vector<Vec3> rgb;
  std::vector<double> sigma;
  double t_far = 1.0;

  /// delta_i = t_{i+1} - t_i, last = t_far - t_n.
  std::vector<double> deltas() const;
  void validate() const;
};

/// delta_i for sorted t-values; the last one reaches t_far.
std::vector<double> deltas_of(const std::vector<double>& t, double t_far);

struct CompositeResult {
  Vec3 color;
  std::vector<double> weights;        // T_i alpha_i
  std::vector<double> transmittance;  // T_i
  double t_end = 1.0;                 // transmittance left for the background
  double depth = 0.0;                 // sum_i w_i t_i
};

CompositeResult composite(const SampleSet& samples, const Vec3& background);

/// Differentiable batched compositing for R rays with S samples each.
/// sigma is R x S, rgb is (R*S) x 3 in ray-major order, deltas R x S.
/// Returns the R x 3 colors and, optionally, the weight values.
ad::Var composite_batch(ad::Var sigma, ad::Var rgb, const Mat& deltas, const Vec3& background,
                        Mat* weights_out = nullptr);

/// Point-wise field evaluated at N positions with N view directions.
using PointField = std::function<void(const Mat& points, const Mat& dirs, Mat& rgb, Vec& sigma)>;

struct RenderOptions {
  int n_samples = 256;
  bool jitter = false;
  std::uint64_t seed = 0;
  std::uint64_t frame = 0;
  double half_extent = 1.0;
  int threads = 1;
};

struct RenderResult {
  Image image;
  std::vector<double> depth;
};

/// Renders every pixel by single-pass stratified sampling of `field` inside
/// the scene cube. Rays that miss the cube take the background color.
RenderResult render_field(const PointField& field, const CameraPose& pose, const Vec3& background,
                          const RenderOptions& opts);

/// Runs fn(row_begin, row_end) over disjoint row ranges on up to `threads`
/// workers.
void parallel_rows(int rows, int threads, const std::function<void(int, int)>& fn);

}  // namespace minerf::render

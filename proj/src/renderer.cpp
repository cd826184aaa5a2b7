// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "minerf/errors.hpp"

namespace minerf::render {

void CameraPose::validate() const {
  if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(R.determinant() - 1.0) > 1e-9) {
    throw UsageError("CameraPose: R is not a proper rotation");
  }
  if (K.width <= 0 || K.height <= 0 || !(K.focal > 0.0)) {
    throw UsageError("CameraPose: invalid intrinsics");
  }
}

CameraPose orbit_pose(double yaw, double pitch, double radius, const Intrinsics& K) {
  const Mat3 Ry = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
  const Mat3 Rx = Eigen::AngleAxisd(pitch, Vec3::UnitX()).toRotationMatrix();
  CameraPose pose;
  pose.R = Ry * Rx;
  pose.t = pose.R * Vec3(0.0, 0.0, radius);
  pose.K = K;
  return pose;
}

Ray rays_from_camera(const CameraPose& pose, Pixel px, double t_near, double t_far) {
  if (px.row < 0 || px.col < 0 || px.row >= pose.K.height || px.col >= pose.K.width) {
    throw UsageError("rays_from_camera: pixel (" + std::to_string(px.row) + ", " +
                     std::to_string(px.col) + ") outside " + std::to_string(pose.K.height) + "x" +
                     std::to_string(pose.K.width) + " image");
  }
  const double u = (px.col + 0.5 - pose.K.cx) / pose.K.focal;
  const double v = (px.row + 0.5 - pose.K.cy) / pose.K.focal;
  // Image rows grow downward, camera +y points up.
  const Vec3 cam_dir(u, -v, -1.0);
  Ray ray;
  ray.origin = pose.t;
  ray.dir = (pose.R * cam_dir).normalized();
  ray.t_near = t_near;
  ray.t_far = t_far;
  return ray;
}

std::optional<Ray> clip_to_bounds(const Ray& ray, double half_extent) {
  double lo = ray.t_near;
  double hi = std::max(ray.t_far, 1e30);
  lo = std::max(lo, 0.0);
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.dir[a];
    if (std::abs(d) < 1e-15) {
      if (o < -half_extent || o > half_extent) return std::nullopt;
      continue;
    }
    double t0 = (-half_extent - o) / d;
    double t1 = (half_extent - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (hi - lo < 1e-9) return std::nullopt;
  Ray out = ray;
  out.t_near = lo;
  out.t_far = hi;
  return out;
}

std::vector<double> stratified_samples(const Ray& ray, int n, bool jitter, Rng& rng) {
  if (n < 1) throw UsageError("stratified_samples: n must be >= 1");
  std::vector<double> t(static_cast<std::size_t>(n));
  const double width = (ray.t_far - ray.t_near) / n;
  for (int k = 0; k < n; ++k) {
    const double offset = jitter ? rng.uniform() : 0.5;
    t[static_cast<std::size_t>(k)] = ray.t_near + (k + offset) * width;
  }
  return t;
}

std::vector<double> sample_pdf(const std::vector<double>& coarse_t, const std::vector<double>& weights,
                               double t_near, double t_far, int n_fine, Rng* rng) {
  const std::size_t n = coarse_t.size();
  if (n == 0 || weights.size() != n) throw DimensionError("sample_pdf: weights/t-values mismatch");
  if (n_fine < 0) throw UsageError("sample_pdf: negative sample count");

  std::vector<double> edges(n + 1);
  edges[0] = t_near;
  for (std::size_t k = 1; k < n; ++k) edges[k] = 0.5 * (coarse_t[k - 1] + coarse_t[k]);
  edges[n] = t_far;

  std::vector<double> mass(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(weights[k] >= 0.0) || !std::isfinite(weights[k])) {
      throw NumericError("sample_pdf: weights must be finite and nonnegative");
    }
    mass[k] = weights[k];
    total += mass[k];
  }
  if (!(total > 0.0)) {
    // Uniform fallback: mass proportional to bin width.
    total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      mass[k] = edges[k + 1] - edges[k];
      total += mass[k];
    }
  }
  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) cdf[k + 1] = cdf[k] + mass[k] / total;
  cdf[n] = 1.0;

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_fine));
  for (int j = 0; j < n_fine; ++j) {
    const double u = (j + (rng ? rng->uniform() : 0.5)) / n_fine;
    // First bin whose upper cdf exceeds u; zero-mass bins are skipped.
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    std::size_t b = static_cast<std::size_t>(std::distance(cdf.begin() + 1, it));
    if (b >= n) b = n - 1;
    while (mass[b] <= 0.0 && b > 0) --b;
    const double frac = mass[b] > 0.0 ? (u - cdf[b]) / (cdf[b + 1] - cdf[b]) : 0.5;
    out.push_back(edges[b] + std::clamp(frac, 0.0, 1.0) * (edges[b + 1] - edges[b]));
  }
  return out;
}

std::vector<double> hierarchical_resample(const std::vector<double>& coarse_t,
                                          const std::vector<double>& weights, double t_near,
                                          double t_far, int n_fine, Rng* rng) {
  std::vector<double> merged = sample_pdf(coarse_t, weights, t_near, t_far, n_fine, rng);
  merged.insert(merged.end(), coarse_t.begin(), coarse_t.end());
  std::sort(merged.begin(), merged.end());
  return merged;
}

std::vector<double> deltas_of(const std::vector<double>& t, double t_far) {
  std::vector<double> d(t.size());
  for (std::size_t k = 0; k + 1 < t.size(); ++k) d[k] = t[k + 1] - t[k];
  if (!t.empty()) d.back() = t_far - t.back();
  return d;
}

std::vector<double> SampleSet::deltas() const { return deltas_of(t, t_far); }

void SampleSet::validate() const {
  if (rgb.size() != t.size() || sigma.size() != t.size()) {
    throw DimensionError("SampleSet: t, rgb, sigma lengths differ");
  }
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k + 1 < t.size() && t[k + 1] < t[k]) throw UsageError("SampleSet: t-values not sorted");
    if (!std::isfinite(sigma[k]) || sigma[k] < 0.0) {
      throw NumericError("SampleSet: sigma must be finite and nonnegative");
    }
  }
  if (!t.empty() && t_far < t.back()) throw UsageError("SampleSet: t_far before last sample");
}

CompositeResult composite(const SampleSet& samples, const Vec3& background) {
  samples.validate();
  const auto deltas = samples.deltas();
  CompositeResult r;
  r.color = Vec3::Zero();
  r.weights.resize(samples.t.size());
  r.transmittance.resize(samples.t.size());
  double optical_depth = 0.0;
  for (std::size_t k = 0; k < samples.t.size(); ++k) {
    const double tau = samples.sigma[k] * deltas[k];
    const double T = std::exp(-optical_depth);
    const double alpha = 1.0 - std::exp(-tau);
    r.transmittance[k] = T;
    r.weights[k] = T * alpha;
    r.color += r.weights[k] * samples.rgb[k];
    r.depth += r.weights[k] * samples.t[k];
    optical_depth += tau;
  }
  r.t_end = std::exp(-optical_depth);
  r.color += r.t_end * background;
  return r;
}

ad::Var composite_batch(ad::Var sigma, ad::Var rgb, const Mat& deltas, const Vec3& background,
                        Mat* weights_out) {
  using namespace ad;
  const auto R = sigma.rows();
  const auto S = sigma.cols();
  if (deltas.rows() != R || deltas.cols() != S || rgb.rows() != R * S || rgb.cols() != 3) {
    throw DimensionError("composite_batch: sigma " + std::to_string(R) + "x" + std::to_string(S) +
                         " inconsistent with deltas or rgb");
  }
  if (!sigma.value().allFinite()) throw NumericError("composite_batch: non-finite density");
  Tape& t = *sigma.tape();

  // Strictly upper-triangular ones: (tau U)[r, i] = sum_{j < i} tau[r, j].
  Mat U = Mat::Zero(S, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) U(j, i) = 1.0;
  }
  Var tau = mul(sigma, t.constant(deltas));
  Var T = exp(neg(matmul(tau, t.constant(U))));
  Var alpha = add_scalar(neg(exp(neg(tau))), 1.0);
  Var w = mul(T, alpha);
  Var t_end = exp(neg(row_sum(tau)));
  if (weights_out != nullptr) *weights_out = w.value();

  std::vector<Var> channels;
  for (int c = 0; c < 3; ++c) {
    Var col = reshape(slice_cols(rgb, c, 1), R, S);
    channels.push_back(add(row_sum(mul(w, col)), scale(t_end, background[c])));
  }
  return concat_cols(channels);
}

void parallel_rows(int rows, int threads, const std::function<void(int, int)>& fn) {
  const int workers = std::clamp(threads, 1, std::max(rows, 1));
  if (workers == 1) {
    fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

RenderResult render_field(const PointField& field, const CameraPose& pose, const Vec3& background,
                          const RenderOptions& opts) {
  pose.validate();
  const int W = pose.K.width;
  const int H = pose.K.height;
  RenderResult out{Image(W, H), std::vector<double>(std::size_t(W) * H, 0.0)};
  const int S = opts.n_samples;

  parallel_rows(H, opts.threads, [&](int row_begin, int row_end) {
    for (int row = row_begin; row < row_end; ++row) {
      std::vector<std::optional<Ray>> rays(static_cast<std::size_t>(W));
      std::vector<std::vector<double>> ts(static_cast<std::size_t>(W));
      int n_hit = 0;
      for (int col = 0; col < W; ++col) {
        rays[col] = clip_to_bounds(rays_from_camera(pose, {row, col}), opts.half_extent);
        if (rays[col]) {
          Rng rng(opts.seed, {opts.frame, std::uint64_t(row) * W + col});
          ts[col] = stratified_samples(*rays[col], S, opts.jitter, rng);
          ++n_hit;
        }
      }
      Mat points(std::size_t(n_hit) * S, 3);
      Mat dirs(std::size_t(n_hit) * S, 3);
      Eigen::Index r = 0;
      for (int col = 0; col < W; ++col) {
        if (!rays[col]) continue;
        for (double t : ts[col]) {
          points.row(r) = (rays[col]->origin + t * rays[col]->dir).transpose();
          dirs.row(r) = rays[col]->dir.transpose();
          ++r;
        }
      }
      Mat rgb;
      Vec sigma;
      if (n_hit > 0) field(points, dirs, rgb, sigma);
      r = 0;
      for (int col = 0; col < W; ++col) {
        if (!rays[col]) {
          out.image.set_pixel(row, col, background);
          continue;
        }
        SampleSet set;
        set.t = ts[col];
        set.t_far = rays[col]->t_far;
        for (int k = 0; k < S; ++k, ++r) {
          set.rgb.emplace_back(rgb.row(r).transpose());
          set.sigma.push_back(sigma[r]);
        }
        const auto res = composite(set, background);
        out.image.set_pixel(row, col, res.color);
        out.depth[std::size_t(row) * W + col] = res.depth;
      }
    }
  });
  return out;
}

}  // namespace minerf::render

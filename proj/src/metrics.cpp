// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "minerf/errors.hpp"

namespace minerf::metrics {

namespace {

void same_shape(const Image& a, const Image& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(what) + ": image shapes differ");
  }
  if (a.empty()) throw DimensionError(std::string(what) + ": empty image");
}

int ckpt_identity(const Checkpoint& ckpt, const std::string& name) {
  const int j = ckpt.model.find_identity(name);
  if (j < 0) throw UsageError("unknown identity '" + name + "'");
  return j;
}

const scene::IdentityData& data_identity(const scene::Dataset& data, const std::string& name) {
  const int j = data.find_identity(name);
  if (j < 0) throw UsageError("unknown identity '" + name + "'");
  return data.identities[static_cast<std::size_t>(j)];
}

}  // namespace

double mse(const Image& a, const Image& b) {
  same_shape(a, b, "mse");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data().size());
}

double psnr(const Image& a, const Image& b, double max_val) {
  const double m = mse(a, b);
  if (m == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(max_val * max_val / m);
}

Mat luma(const Image& img) {
  Mat y(img.height(), img.width());
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      y(r, c) = 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
    }
  }
  return y;
}

double ssim(const Mat& a, const Mat& b, int window, double max_val) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("ssim: image shapes differ");
  if (window < 1) throw UsageError("ssim: window must be positive");
  if (a.rows() < window || a.cols() < window) throw UsageError("ssim: image smaller than the window");
  const double c1 = (0.01 * max_val) * (0.01 * max_val);
  const double c2 = (0.03 * max_val) * (0.03 * max_val);
  const double n = static_cast<double>(window) * window;
  double total = 0.0;
  long count = 0;
  for (Eigen::Index r0 = 0; r0 + window <= a.rows(); ++r0) {
    for (Eigen::Index q0 = 0; q0 + window <= a.cols(); ++q0) {
      const auto pa = a.block(r0, q0, window, window);
      const auto pb = b.block(r0, q0, window, window);
      const double ma = pa.sum() / n;
      const double mb = pb.sum() / n;
      const double va = (pa.array() - ma).square().sum() / n;
      const double vb = (pb.array() - mb).square().sum() / n;
      const double cov = ((pa.array() - ma) * (pb.array() - mb)).sum() / n;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double ssim(const Image& a, const Image& b, int window, double max_val) {
  same_shape(a, b, "ssim");
  return ssim(luma(a), luma(b), window, max_val);
}

Vec singular_values(const Mat& W, double tol, int max_sweeps) {
  if (!W.allFinite()) throw NumericError("singular_values: non-finite entries");
  Mat A = W.rows() >= W.cols() ? Mat(W) : Mat(W.transpose());
  const auto n = A.cols();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = A.col(p).squaredNorm();
        const double beta = A.col(q).squaredNorm();
        const double gamma = A.col(p).dot(A.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Vec cp = A.col(p);
        A.col(p) = c * cp - s * A.col(q);
        A.col(q) = s * cp + c * A.col(q);
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) sv[static_cast<std::size_t>(k)] = A.col(k).norm();
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return Eigen::Map<Vec>(sv.data(), n);
}

Image render_frame(const Checkpoint& ckpt, int target, const Vec& expression, const Vec& latent,
                   const render::CameraPose& pose, int threads) {
  ModelRenderOptions opts;
  opts.n_coarse = ckpt.config.render.n_coarse;
  opts.n_fine = ckpt.config.render.n_fine;
  opts.threads = threads;
  const auto& bg = ckpt.config.scene.background;
  opts.background = Vec3(bg[0], bg[1], bg[2]);
  return render_image(ckpt.model, pose, {target, expression, latent}, opts).image;
}

double test_psnr(const Checkpoint& ckpt, const scene::Dataset& data, int threads) {
  double acc = 0.0;
  int n = 0;
  for (const auto& id : data.identities) {
    const int j = ckpt_identity(ckpt, id.name);
    const Vec latent = ckpt.model.mean_latent(j);
    for (int f = id.n_train(); f < static_cast<int>(id.frames.size()); ++f) {
      const auto& fr = id.frames[static_cast<std::size_t>(f)];
      acc += psnr(render_frame(ckpt, j, fr.expression, latent, fr.pose, threads), fr.image);
      ++n;
    }
  }
  if (n == 0) throw UsageError("test_psnr: dataset has no held-out frames");
  return acc / n;
}

double transfer_eval(const Checkpoint& ckpt, const scene::Dataset& data, const std::string& source,
                     const std::string& target, int threads) {
  const auto& src = data_identity(data, source);
  const int spec_target = data.find_identity(target);
  if (spec_target < 0) throw UsageError("unknown identity '" + target + "'");
  const int j = ckpt_identity(ckpt, target);
  ckpt_identity(ckpt, source);
  const Vec latent = ckpt.model.mean_latent(j);
  const auto gt_opts = scene::ground_truth_options(data.config);
  double acc = 0.0;
  int n = 0;
  for (int f = src.n_train(); f < static_cast<int>(src.frames.size()); ++f) {
    const auto& fr = src.frames[static_cast<std::size_t>(f)];
    const Image gt = scene::render_ground_truth(data.spec, spec_target, fr.expression, fr.pose, gt_opts);
    acc += psnr(render_frame(ckpt, j, fr.expression, latent, fr.pose, threads), gt);
    ++n;
  }
  if (n == 0) throw UsageError("transfer_eval: source identity has no held-out frames");
  return acc / n;
}

EvalReport evaluate(const Checkpoint& ckpt, const scene::Dataset& data, bool with_transfer, int ssim_window,
                    int threads) {
  EvalReport rep;
  rep.variant = std::string(cond::to_string(ckpt.model.cfg.variant));
  double ps = 0.0;
  double ss = 0.0;
  int finite = 0;
  bool any_inf = false;
  for (const auto& id : data.identities) {
    rep.identities.push_back(id.name);
    const int j = ckpt_identity(ckpt, id.name);
    const Vec latent = ckpt.model.mean_latent(j);
    for (int f = id.n_train(); f < static_cast<int>(id.frames.size()); ++f) {
      const auto& fr = id.frames[static_cast<std::size_t>(f)];
      const Image img = render_frame(ckpt, j, fr.expression, latent, fr.pose, threads);
      FrameScore s{id.name, f, psnr(img, fr.image), ssim(img, fr.image, ssim_window)};
      if (std::isinf(s.psnr)) {
        any_inf = true;
      } else {
        ps += s.psnr;
        ++finite;
      }
      ss += s.ssim;
      rep.frames.push_back(s);
    }
  }
  if (rep.frames.empty()) throw UsageError("evaluate: dataset has no held-out frames");
  rep.mean_psnr = any_inf ? kInfinitePsnr : ps / finite;
  rep.mean_ssim = ss / static_cast<double>(rep.frames.size());
  if (with_transfer) {
    for (const auto& src : rep.identities) {
      std::vector<double> row;
      for (const auto& tgt : rep.identities) row.push_back(transfer_eval(ckpt, data, src, tgt, threads));
      rep.transfer.push_back(std::move(row));
    }
  }
  return rep;
}

std::string format_psnr(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

nlohmann::json to_json(const EvalReport& report) {
  const auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : report.frames) {
    frames.push_back({{"identity", f.identity}, {"frame", f.frame}, {"psnr", num(f.psnr)}, {"ssim", f.ssim}});
  }
  nlohmann::json transfer = nlohmann::json::array();
  for (const auto& row : report.transfer) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(num(v));
    transfer.push_back(r);
  }
  return {{"variant", report.variant},   {"mean_psnr", num(report.mean_psnr)},
          {"mean_ssim", report.mean_ssim}, {"identities", report.identities},
          {"frames", frames},            {"transfer", transfer}};
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "frames.csv");
    if (!f) throw UsageError("cannot write " + (dir / "frames.csv").string());
    f << "identity,frame,psnr,ssim\n";
    f.precision(17);
    for (const auto& s : report.frames) {
      f << s.identity << ',' << s.frame << ',' << format_psnr(s.psnr) << ',' << s.ssim << '\n';
    }
  }
  if (!report.transfer.empty()) {
    std::ofstream f(dir / "transfer.csv");
    f << "source";
    for (const auto& n : report.identities) f << ',' << n;
    f << '\n';
    for (std::size_t j = 0; j < report.transfer.size(); ++j) {
      f << report.identities[j];
      for (double v : report.transfer[j]) f << ',' << format_psnr(v);
      f << '\n';
    }
  }
  std::ofstream f(dir / "summary.json");
  f << to_json(report).dump(2) << '\n';
}

void write_singular_values_csv(const Vec& s, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path.string());
  f.precision(17);
  f << "index,singular_value\n";
  for (Eigen::Index k = 0; k < s.size(); ++k) f << k << ',' << s[k] << '\n';
}

}  // namespace minerf::metrics

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "minerf/errors.hpp"
#include "minerf/metrics.hpp"
#include "minerf/rng.hpp"

namespace minerf::train {

double lr_schedule(std::int64_t step, std::int64_t total, double lr0, double lr1) {
  if (total <= 0) return lr0;
  if (step < 0 || step > total) throw UsageError("lr_schedule: step outside [0, total]");
  if (step == total) return lr1;
  return lr0 * std::pow(lr1 / lr0, static_cast<double>(step) / static_cast<double>(total));
}

void adam_step(Mat& value, const Mat& grad, Mat& m, Mat& v, std::int64_t t, double lr, const AdamHyper& h) {
  if (grad.rows() != value.rows() || grad.cols() != value.cols() || m.rows() != value.rows() ||
      m.cols() != value.cols() || v.rows() != value.rows() || v.cols() != value.cols()) {
    throw DimensionError("adam_step: shape mismatch");
  }
  if (t < 1) throw UsageError("adam_step: step index must be >= 1");
  m = h.beta1 * m + (1.0 - h.beta1) * grad;
  v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + h.eps);
}

void adam_step(Param& p, const Mat& grad, double lr, const AdamHyper& h) {
  adam_step(p.value, grad, p.adam_m, p.adam_v, p.adam_t + 1, lr, h);
  ++p.adam_t;
}

LossTerms loss(std::span<const ad::Var> preds, const Mat& target, ad::Var l, ad::Var i, double lambda_l,
               double lambda_i, bool squared) {
  using namespace ad;
  if (preds.empty()) throw UsageError("loss: no predictions");
  if (lambda_l < 0.0 || lambda_i < 0.0) throw UsageError("loss: negative regularization weight");
  Tape& t = *preds.front().tape();
  const Var gt = t.constant(target);
  LossTerms out;
  Var total;
  for (const Var& p : preds) {
    if (p.rows() != target.rows() || p.cols() != target.cols()) {
      throw DimensionError("loss: " + std::to_string(p.rows()) + " predicted rays vs " +
                           std::to_string(target.rows()) + " targets");
    }
    Var term = sum(square(sub(p, gt)));
    out.color += term.scalar();
    total = total.valid() ? add(total, term) : term;
  }
  const auto reg = [&](Var code, double lambda, double& report) {
    if (!code.valid()) return;
    Var r = squared ? sum(square(code)) : l2norm(code);
    report = r.scalar();
    if (lambda != 0.0) total = add(total, scale(r, lambda));
  };
  reg(l, lambda_l, out.latent);
  reg(i, lambda_i, out.identity);
  out.total = total;
  return out;
}

StepPlan plan_step(const Checkpoint& ckpt, std::span<const scene::IdentityData* const> pool, std::int64_t step,
                   std::uint64_t seed) {
  if (pool.empty()) throw UsageError("plan_step: no identities to train on");
  const auto& tc = ckpt.config.train;
  Rng rng(seed, {static_cast<std::uint64_t>(step), 0x57e9});
  const auto& id = *pool[rng.below(pool.size())];
  if (id.frames.empty()) throw UsageError("plan_step: identity '" + id.name + "' has no frames");
  const int n_train = id.n_train() > 0 ? id.n_train() : static_cast<int>(id.frames.size());

  StepPlan plan;
  plan.step = step;
  plan.seed = seed;
  plan.identity = ckpt.model.find_identity(id.name);
  if (plan.identity < 0) throw UsageError("plan_step: identity '" + id.name + "' not in the model");
  plan.frame = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_train)));
  const auto& fr = id.frames[static_cast<std::size_t>(plan.frame)];
  plan.expression = fr.expression;
  const int W = fr.image.width();
  const int H = fr.image.height();
  const auto& bgc = ckpt.config.scene.background;
  const Vec3 bg(bgc[0], bgc[1], bgc[2]);

  const int n_rays = tc.rays;
  const int n_in = fr.box.area() > 0 ? static_cast<int>(std::lround(tc.in_box_fraction * n_rays)) : 0;
  const bool box_is_all = fr.box.area() >= W * H;
  std::vector<std::vector<double>> targets;
  for (int r = 0; r < n_rays; ++r) {
    int row = 0;
    int col = 0;
    if (r < n_in) {
      row = fr.box.row0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(fr.box.row1 - fr.box.row0)));
      col = fr.box.col0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(fr.box.col1 - fr.box.col0)));
    } else {
      for (int attempt = 0; attempt < 64; ++attempt) {
        row = static_cast<int>(rng.below(static_cast<std::uint64_t>(H)));
        col = static_cast<int>(rng.below(static_cast<std::uint64_t>(W)));
        if (box_is_all || !fr.box.contains(row, col)) break;
      }
    }
    const int px = row * W + col;
    const Vec3 target = fr.image.pixel(row, col);
    const auto ray = render::clip_to_bounds(render::rays_from_camera(fr.pose, {row, col}), 1.0);
    if (!ray) {
      plan.miss_loss += 2.0 * (bg - target).squaredNorm();
      continue;
    }
    Rng ray_rng(seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(plan.frame),
                       static_cast<std::uint64_t>(px), static_cast<std::uint64_t>(r), 1});
    plan.coarse_t.push_back(render::stratified_samples(*ray, ckpt.config.render.n_coarse, true, ray_rng));
    plan.rays.push_back(*ray);
    plan.pixels.push_back(px);
    targets.push_back({target[0], target[1], target[2]});
  }
  plan.targets.resize(static_cast<Eigen::Index>(targets.size()), 3);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    for (int c = 0; c < 3; ++c) plan.targets(static_cast<Eigen::Index>(r), c) = targets[r][static_cast<std::size_t>(c)];
  }
  return plan;
}

StepLoss step_loss(ad::Tape& tape, const Checkpoint& ckpt, const StepPlan& plan, bool trainable,
                   const cond::VarMap* overrides, const std::vector<std::vector<double>>* fixed_fine_t) {
  const auto& model = ckpt.model;
  const auto& cfg = ckpt.config;
  StepLoss out;
  out.net = register_network(tape, model, trainable, overrides);
  const auto leaf = [&](const std::string& name) {
    if (overrides != nullptr) {
      if (auto it = overrides->find(name); it != overrides->end()) return it->second;
    }
    const Mat& v = model.params.at(name).value;
    return trainable ? tape.variable(v) : tape.constant(v);
  };
  out.id_code = leaf(Model::identity_param(plan.identity));
  out.latent = leaf(Model::latent_param(plan.identity, plan.frame));
  const ad::Var e = tape.constant(plan.expression);
  const ad::Var c = conditioning(model, out.net, e, out.id_code, out.latent);
  const auto& bgc = cfg.scene.background;
  const Vec3 bg(bgc[0], bgc[1], bgc[2]);

  std::vector<ad::Var> preds;
  if (!plan.rays.empty()) {
    FineSampler sampler;
    if (cfg.render.n_fine > 0 && fixed_fine_t == nullptr) {
      sampler = [&](std::size_t r, const std::vector<double>& ct, const std::vector<double>& w) {
        Rng rng(plan.seed, {static_cast<std::uint64_t>(plan.step), static_cast<std::uint64_t>(plan.frame),
                                 static_cast<std::uint64_t>(plan.pixels[r]), r, 2});
        return render::hierarchical_resample(ct, w, plan.rays[r].t_near, plan.rays[r].t_far, cfg.render.n_fine, &rng);
      };
    }
    static const std::vector<std::vector<double>> kNone;
    const auto res = forward_rays(model, out.net, c, out.latent, plan.rays, plan.coarse_t, sampler,
                                  fixed_fine_t != nullptr ? *fixed_fine_t : kNone, bg);
    out.fine_t = res.fine_t;
    preds.push_back(res.coarse_rgb);
    if (cfg.render.n_fine > 0 || fixed_fine_t != nullptr) preds.push_back(res.fine_rgb);
  }
  if (preds.empty()) {
    // Every ray missed the cube: only the regularizers carry gradient.
    preds.push_back(tape.constant(Mat::Zero(0, 3)));
  }
  out.terms = loss(preds, plan.targets, out.latent, out.id_code, cfg.train.lambda_l, cfg.train.lambda_i,
                   cfg.train.squared_reg);
  out.terms.color += plan.miss_loss;
  return out;
}

namespace {

bool is_frozen(const std::string& name, const std::vector<std::string>& frozen) {
  return std::any_of(frozen.begin(), frozen.end(),
                     [&](const std::string& p) { return name.compare(0, p.size(), p) == 0; });
}

}  // namespace

StepStats train_step(Checkpoint& ckpt, const StepPlan& plan, double lr, const std::vector<std::string>& frozen) {
  ad::Tape tape;
  const StepLoss sl = step_loss(tape, ckpt, plan, true);
  StepStats stats{sl.terms.color, sl.terms.latent, sl.terms.identity, lr};
  if (!std::isfinite(sl.terms.total.scalar()) || !std::isfinite(stats.loss_c)) {
    std::ostringstream os;
    os << "non-finite loss at step " << plan.step << " (identity " << plan.identity << ", frame " << plan.frame
       << ", lr " << lr << ", loss_c " << stats.loss_c << ", loss_l " << stats.loss_l << ", loss_i "
       << stats.loss_i << ")";
    throw NumericError(os.str());
  }
  tape.backward(sl.terms.total);

  std::vector<std::pair<std::string, ad::Var>> leaves = sl.net.leaves;
  leaves.emplace_back(Model::identity_param(plan.identity), sl.id_code);
  leaves.emplace_back(Model::latent_param(plan.identity, plan.frame), sl.latent);
  for (const auto& [name, var] : leaves) {
    if (is_frozen(name, frozen)) continue;
    adam_step(ckpt.model.params.at(name), tape.grad(var), lr);
  }
  return stats;
}

TrainResult train(const scene::Dataset& data, const RunConfig& config, const TrainHooks& hooks) {
  if (data.identities.empty() || data.frame_count() == 0) throw UsageError("train: empty dataset");
  config.validate();
  std::vector<IdentitySlot> slots;
  std::vector<const scene::IdentityData*> pool;
  for (const auto& id : data.identities) {
    slots.push_back({id.name, static_cast<int>(id.frames.size()), id.n_train()});
    pool.push_back(&id);
  }
  TrainResult res;
  res.ckpt = initial_checkpoint(config, slots);
  const auto& tc = config.train;
  const bool has_test = std::any_of(data.identities.begin(), data.identities.end(),
                                    [](const scene::IdentityData& id) { return id.n_test > 0; });
  double reference = -1.0;
  for (std::int64_t s = 0; s < tc.steps; ++s) {
    const double lr = lr_schedule(s, tc.steps, tc.lr_start, tc.lr_end);
    const StepPlan plan = plan_step(res.ckpt, pool, s, tc.seed);
    const StepStats st = train_step(res.ckpt, plan, lr);
    res.ckpt.step = s + 1;
    res.loss_history.push_back(st.loss_c);
    if (s == 100) reference = st.loss_c;
    if (reference > 0.0 && s > 100 && st.loss_c > tc.divergence_factor * reference) {
      std::ostringstream os;
      os << "divergence at step " << s << ": loss_c " << st.loss_c << " exceeds " << tc.divergence_factor
         << "x its step-100 value " << reference;
      throw NumericError(os.str());
    }
    const bool last = s + 1 == tc.steps;
    const bool log_now = last || (tc.log_every > 0 && (s + 1) % tc.log_every == 0);
    const bool test_now = has_test && (last || (tc.test_every > 0 && (s + 1) % tc.test_every == 0));
    if (log_now || test_now) {
      LogRow row{s + 1, st.loss_c, st.loss_l, st.loss_i, lr};
      if (test_now) {
        row.test_psnr = metrics::test_psnr(res.ckpt, data, config.render.threads);
        if (last) res.final_test_psnr = row.test_psnr;
      }
      res.log.push_back(row);
      if (hooks.on_log) hooks.on_log(row);
    }
  }
  return res;
}

void write_metrics_csv(const std::vector<LogRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write " + path.string());
  f.precision(10);
  f << "step,loss_c,loss_l,loss_i,lr,test_psnr\n";
  for (const auto& r : rows) {
    f << r.step << ',' << r.loss_c << ',' << r.loss_l << ',' << r.loss_i << ',' << r.lr << ',';
    if (!std::isnan(r.test_psnr)) f << metrics::format_psnr(r.test_psnr);
    f << '\n';
  }
}

double clip_psnr(const Checkpoint& ckpt, int identity, const scene::IdentityData& clip) {
  if (clip.frames.empty()) throw UsageError("clip_psnr: empty clip");
  double acc = 0.0;
  for (std::size_t f = 0; f < clip.frames.size(); ++f) {
    const auto& fr = clip.frames[f];
    const Vec latent = ckpt.model.latent(identity, static_cast<int>(f));
    acc += metrics::psnr(metrics::render_frame(ckpt, identity, fr.expression, latent, fr.pose,
                                               ckpt.config.render.threads),
                         fr.image);
  }
  return acc / static_cast<double>(clip.frames.size());
}

PersonalizeResult personalize(const Checkpoint& ckpt, const scene::IdentityData& clip,
                              const PersonalizeOptions& opts) {
  if (clip.frames.empty()) throw UsageError("personalize: empty frame set");
  if (opts.steps < 0) throw UsageError("personalize: negative step count");
  PersonalizeResult res;
  res.ckpt = ckpt;
  const std::uint64_t seed = splitmix64(ckpt.config.train.seed ^ 0x9e50a1ULL);
  res.identity = res.ckpt.model.find_identity(clip.name);
  if (res.identity < 0) {
    res.unseen = true;
    res.identity = res.ckpt.model.add_identity(
        {clip.name, static_cast<int>(clip.frames.size()), clip.n_train() > 0 ? clip.n_train() : static_cast<int>(clip.frames.size())},
        seed);
  } else if (static_cast<int>(clip.frames.size()) > res.ckpt.model.identities[static_cast<std::size_t>(res.identity)].n_frames) {
    throw UsageError("personalize: clip has more frames than identity '" + clip.name + "'");
  }
  res.psnr_before = clip_psnr(res.ckpt, res.identity, clip);
  if (opts.steps == 0) {
    res.psnr_after = res.psnr_before;
    return res;
  }
  const scene::IdentityData* pool[] = {&clip};
  const std::vector<std::string> frozen = {"cond."};
  for (int s = 0; s < opts.steps; ++s) {
    const StepPlan plan = plan_step(res.ckpt, pool, s, seed);
    train_step(res.ckpt, plan, opts.lr, frozen);
  }
  res.psnr_after = clip_psnr(res.ckpt, res.identity, clip);
  return res;
}

}  // namespace minerf::train

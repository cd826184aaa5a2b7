// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/model.hpp"

#include <algorithm>
#include <cmath>

#include "minerf/errors.hpp"
#include "minerf/rng.hpp"

namespace minerf {

ModelConfig ModelConfig::from(const RunConfig& cfg) {
  ModelConfig m;
  m.variant = cfg.conditioning.variant;
  m.dims = cfg.conditioning.dims;
  m.field.layers = cfg.field.layers;
  m.field.hidden = cfg.field.hidden;
  m.field.Lx = cfg.field.Lx;
  m.field.Lv = cfg.field.Lv;
  m.field.color_layers = cfg.field.color_layers;
  m.field.color_hidden = cfg.field.color_hidden;
  m.field.cond_dim = cond::output_dim(m.variant, m.dims);
  m.field.latent_dim = cond::field_takes_latent(m.variant) ? m.dims.d_latent : 0;
  return m;
}

namespace {

constexpr double kCodeStd = 0.01;

void add_shapes(ParamStore& store, const std::string& prefix, const std::vector<cond::ParamShape>& shapes,
                Rng& rng) {
  for (const auto& s : shapes) {
    Mat v = s.fan_in == 0 ? Mat(Mat::Zero(s.rows, s.cols)) : xavier_uniform(s.rows, s.cols, s.fan_in, s.fan_out, rng);
    store.add(prefix + s.name, std::move(v));
  }
}

Mat normal_code(int n, Rng& rng) {
  Mat m(n, 1);
  for (int r = 0; r < n; ++r) m(r, 0) = kCodeStd * rng.normal();
  return m;
}

}  // namespace

std::string Model::identity_param(int j) { return "id/" + std::to_string(j); }
std::string Model::latent_param(int j, int frame) {
  return "latent/" + std::to_string(j) + "/" + std::to_string(frame);
}

Model Model::init(const ModelConfig& cfg, const std::vector<IdentitySlot>& identities, std::uint64_t seed) {
  Model m;
  m.cfg = cfg;
  Rng rng(seed, {0x1417});
  add_shapes(m.params, "cond.", cond::param_shapes(cfg.variant, cfg.dims), rng);
  const auto field_shapes = field::param_shapes(cfg.field);
  add_shapes(m.params, "coarse.", field_shapes, rng);
  add_shapes(m.params, "fine.", field_shapes, rng);
  for (const auto& slot : identities) m.add_identity(slot, seed);
  return m;
}

int Model::add_identity(const IdentitySlot& slot, std::uint64_t seed) {
  if (slot.n_frames < 0 || slot.n_train < 0 || slot.n_train > slot.n_frames) {
    throw UsageError("add_identity: invalid frame counts for '" + slot.name + "'");
  }
  if (find_identity(slot.name) >= 0) throw UsageError("add_identity: duplicate identity '" + slot.name + "'");
  const int j = n_identities();
  Rng rng(seed, {0x1d, static_cast<std::uint64_t>(j)});
  params.add(identity_param(j), normal_code(cfg.dims.d, rng));
  for (int f = 0; f < slot.n_frames; ++f) params.add(latent_param(j, f), normal_code(cfg.dims.d_latent, rng));
  identities.push_back(slot);
  return j;
}

int Model::find_identity(std::string_view name) const {
  for (std::size_t j = 0; j < identities.size(); ++j) {
    if (identities[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

Vec Model::mean_latent(int j) const {
  const auto& slot = identities.at(static_cast<std::size_t>(j));
  Vec mean = Vec::Zero(cfg.dims.d_latent);
  const int n = slot.n_train > 0 ? slot.n_train : slot.n_frames;
  for (int f = 0; f < n; ++f) mean += params.at(latent_param(j, f)).value.col(0);
  return n > 0 ? Vec(mean / static_cast<double>(n)) : mean;
}

Vec Model::latent(int j, int frame) const {
  const auto& slot = identities.at(static_cast<std::size_t>(j));
  if (frame >= 0 && frame < slot.n_train) return params.at(latent_param(j, frame)).value.col(0);
  return mean_latent(j);
}

TapeParams register_network(ad::Tape& tape, const Model& model, bool trainable,
                            const cond::VarMap* overrides) {
  TapeParams tp;
  for (const auto& p : model.params.all()) {
    cond::VarMap* target = nullptr;
    std::string local;
    for (auto [prefix, map] : {std::pair{"cond.", &tp.cond}, {"coarse.", &tp.coarse}, {"fine.", &tp.fine}}) {
      const std::string_view pre(prefix);
      if (p.name.compare(0, pre.size(), pre) == 0) {
        target = map;
        local = p.name.substr(pre.size());
      }
    }
    if (target == nullptr) continue;
    ad::Var v;
    if (overrides != nullptr) {
      if (auto it = overrides->find(p.name); it != overrides->end()) v = it->second;
    }
    if (!v.valid()) v = trainable ? tape.variable(p.value) : tape.constant(p.value);
    (*target)[local] = v;
    tp.leaves.emplace_back(p.name, v);
  }
  return tp;
}

ad::Var conditioning(const Model& model, const TapeParams& tp, ad::Var e, ad::Var i, ad::Var l) {
  return cond::variant_forward(model.cfg.variant, model.cfg.dims, tp.cond, e, i, l);
}

namespace {

struct PassOutput {
  ad::Var rgb;
  Mat weights;
};

PassOutput run_pass(const Model& model, const cond::VarMap& field_params, ad::Var cond, ad::Var latent,
                    const std::vector<render::Ray>& rays, const std::vector<std::vector<double>>& ts,
                    const Vec3& background) {
  const auto& fc = model.cfg.field;
  const std::size_t R = rays.size();
  const std::size_t S = ts.front().size();
  Mat points(R * S, 3);
  Mat dirs(R * S, 3);
  Mat deltas(R, S);
  for (std::size_t r = 0; r < R; ++r) {
    if (ts[r].size() != S) throw DimensionError("forward_rays: rays must share the sample count");
    const auto d = render::deltas_of(ts[r], rays[r].t_far);
    for (std::size_t s = 0; s < S; ++s) {
      points.row(r * S + s) = (rays[r].origin + ts[r][s] * rays[r].dir).transpose();
      dirs.row(r * S + s) = rays[r].dir.transpose();
      deltas(r, s) = d[s];
    }
  }
  const Mat ex = field::positional_encode_rows(points, fc.Lx);
  const Mat ev = field::positional_encode_rows(dirs, fc.Lv);
  const auto out = field::field_forward(fc, field_params, cond, latent, ex, ev);
  const auto sigma = ad::reshape(out.sigma, static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(S));
  PassOutput res;
  res.rgb = render::composite_batch(sigma, out.rgb, deltas, background, &res.weights);
  return res;
}

}  // namespace

RayBatchOutput forward_rays(const Model& model, const TapeParams& tp, ad::Var cond, ad::Var latent,
                            const std::vector<render::Ray>& rays,
                            const std::vector<std::vector<double>>& coarse_t, const FineSampler& sampler,
                            const std::vector<std::vector<double>>& fixed_fine_t, const Vec3& background) {
  if (rays.empty()) throw UsageError("forward_rays: empty ray batch");
  if (coarse_t.size() != rays.size()) throw DimensionError("forward_rays: one t-vector per ray required");
  if (!cond::field_takes_latent(model.cfg.variant)) latent = ad::Var();

  RayBatchOutput out;
  const auto coarse = run_pass(model, tp.coarse, cond, latent, rays, coarse_t, background);
  out.coarse_rgb = coarse.rgb;

  const bool has_fine = !fixed_fine_t.empty() || static_cast<bool>(sampler);
  if (!has_fine) {
    out.fine_rgb = coarse.rgb;
    out.fine_t = coarse_t;
  } else {
    if (!fixed_fine_t.empty()) {
      if (fixed_fine_t.size() != rays.size()) throw DimensionError("forward_rays: fine t-vector count");
      out.fine_t = fixed_fine_t;
    } else {
      out.fine_t.resize(rays.size());
      std::vector<double> w(coarse_t.front().size());
      for (std::size_t r = 0; r < rays.size(); ++r) {
        for (std::size_t s = 0; s < w.size(); ++s) w[s] = coarse.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
        out.fine_t[r] = sampler(r, coarse_t[r], w);
      }
    }
    const auto fine = run_pass(model, tp.fine, cond, latent, rays, out.fine_t, background);
    out.fine_rgb = fine.rgb;
    out.depth.resize(rays.size());
    for (std::size_t r = 0; r < rays.size(); ++r) {
      double depth = 0.0;
      for (std::size_t s = 0; s < out.fine_t[r].size(); ++s) {
        depth += fine.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) * out.fine_t[r][s];
      }
      out.depth[r] = depth;
    }
    return out;
  }
  out.depth.resize(rays.size());
  for (std::size_t r = 0; r < rays.size(); ++r) {
    double depth = 0.0;
    for (std::size_t s = 0; s < coarse_t[r].size(); ++s) {
      depth += coarse.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) * coarse_t[r][s];
    }
    out.depth[r] = depth;
  }
  return out;
}

render::RenderResult render_image(const Model& model, const render::CameraPose& pose,
                                  const FrameInputs& inputs, const ModelRenderOptions& opts) {
  pose.validate();
  if (opts.n_coarse < 1 || opts.n_fine < 0) throw UsageError("render_image: invalid sample counts");
  if (inputs.identity < 0 || inputs.identity >= model.n_identities()) {
    throw UsageError("render_image: unknown identity index " + std::to_string(inputs.identity));
  }
  if (inputs.expression.size() != model.cfg.dims.d) throw DimensionError("render_image: expression length");
  const int W = pose.K.width;
  const int H = pose.K.height;
  render::RenderResult out{Image(W, H), std::vector<double>(std::size_t(W) * H, 0.0)};
  const Mat& code = model.identity_code(inputs.identity);

  // Chunks cover fixed pixel ranges so batch composition, and with it every
  // floating-point result, does not depend on the thread count.
  const int n_pixels = W * H;
  const int chunk = std::max(1, opts.rays_per_chunk);
  const int n_chunks = (n_pixels + chunk - 1) / chunk;
  render::parallel_rows(n_chunks, opts.threads, [&](int chunk_begin, int chunk_end) {
    for (int ck = chunk_begin; ck < chunk_end; ++ck) {
      std::vector<render::Ray> rays;
      std::vector<int> pixel_of;
      std::vector<std::vector<double>> ts;
      for (int px = ck * chunk; px < std::min(n_pixels, (ck + 1) * chunk); ++px) {
        const int row = px / W;
        const int col = px % W;
        const auto ray = render::clip_to_bounds(render::rays_from_camera(pose, {row, col}), opts.half_extent);
        if (!ray) {
          out.image.set_pixel(row, col, opts.background);
          continue;
        }
        Rng rng(opts.seed, {opts.step, opts.frame, static_cast<std::uint64_t>(px), 1});
        ts.push_back(render::stratified_samples(*ray, opts.n_coarse, opts.jitter, rng));
        rays.push_back(*ray);
        pixel_of.push_back(px);
      }
      if (rays.empty()) continue;
      ad::Tape tape;
      const TapeParams tp = register_network(tape, model, false);
      const ad::Var e = tape.constant(inputs.expression);
      const ad::Var i = tape.constant(code);
      const ad::Var l = tape.constant(inputs.latent);
      const ad::Var c = conditioning(model, tp, e, i, l);
      FineSampler sampler;
      if (opts.n_fine > 0) {
        sampler = [&](std::size_t r, const std::vector<double>& ct, const std::vector<double>& w) {
          if (!opts.jitter) return render::hierarchical_resample(ct, w, rays[r].t_near, rays[r].t_far, opts.n_fine, nullptr);
          Rng rng(opts.seed, {opts.step, opts.frame, static_cast<std::uint64_t>(pixel_of[r]), 2});
          return render::hierarchical_resample(ct, w, rays[r].t_near, rays[r].t_far, opts.n_fine, &rng);
        };
      }
      const auto res = forward_rays(model, tp, c, l, rays, ts, sampler, {}, opts.background);
      const Mat& rgb = res.fine_rgb.value();
      for (std::size_t r = 0; r < rays.size(); ++r) {
        const int px = pixel_of[r];
        out.image.set_pixel(px / W, px % W, Vec3(rgb.row(static_cast<Eigen::Index>(r)).transpose()));
        out.depth[static_cast<std::size_t>(px)] = res.depth[r];
      }
    }
  });
  return out;
}

}  // namespace minerf

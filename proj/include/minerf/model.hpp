// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// The full learnable model: one conditioning module shared by a coarse and a
// fine radiance field, one identity code per identity and one latent code
// per frame. Parameter names:
//   cond.<name>, coarse.<name>, fine.<name>, id/<j>, latent/<j>/<f>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "minerf/autodiff.hpp"
#include "minerf/conditioning.hpp"
#include "minerf/config.hpp"
#include "minerf/field.hpp"
#include "minerf/image.hpp"
#include "minerf/params.hpp"
#include "minerf/renderer.hpp"

namespace minerf {

struct ModelConfig {
  cond::VariantId variant = cond::VariantId::M;
  cond::CondDims dims;
  field::FieldConfig field;

  static ModelConfig from(const RunConfig& cfg);
};

struct IdentitySlot {
  std::string name;
  int n_frames = 0;  // latent codes allocated
  int n_train = 0;   // leading frames whose latents are optimized
};

class Model {
 public:
  static Model init(const ModelConfig& cfg, const std::vector<IdentitySlot>& identities, std::uint64_t seed);

  /// Appends a fresh identity code and latents; returns its index.
  int add_identity(const IdentitySlot& slot, std::uint64_t seed);

  static std::string identity_param(int j);
  static std::string latent_param(int j, int frame);

  int n_identities() const { return static_cast<int>(identities.size()); }
  int find_identity(std::string_view name) const;  // -1 if absent

  /// Latent used for frames without their own optimized code: the mean over
  /// the identity's training frames.
  Vec mean_latent(int j) const;
  Vec latent(int j, int frame) const;
  const Mat& identity_code(int j) const { return params.at(identity_param(j)).value; }

  ModelConfig cfg;
  ParamStore params;
  std::vector<IdentitySlot> identities;
};

/// Parameters of one forward pass, registered on a tape.
struct TapeParams {
  cond::VarMap cond;
  cond::VarMap coarse;
  cond::VarMap fine;
  /// Every registered (name, Var) pair, in registration order.
  std::vector<std::pair<std::string, ad::Var>> leaves;
};

/// Registers the module and both fields. Trainable leaves are tape
/// variables, the rest constants. Names found in `overrides` take the given
/// Var instead of a new leaf.
TapeParams register_network(ad::Tape& tape, const Model& model, bool trainable,
                            const cond::VarMap* overrides = nullptr);

/// Conditioning vector M(e, i) (or variant) for the given code Vars.
ad::Var conditioning(const Model& model, const TapeParams& tp, ad::Var e, ad::Var i, ad::Var l);

/// Fine-sample generator: given ray index, coarse t and coarse weights,
/// returns the merged sorted t-values for the fine pass.
using FineSampler = std::function<std::vector<double>(std::size_t, const std::vector<double>&,
                                                      const std::vector<double>&)>;

struct RayBatchOutput {
  ad::Var coarse_rgb;  // R x 3
  ad::Var fine_rgb;    // R x 3 (== coarse_rgb when there is no fine pass)
  std::vector<std::vector<double>> fine_t;
  std::vector<double> depth;  // expected depth of the final pass
};

/// Coarse pass at `coarse_t`, then the fine pass at the sampler's t-values
/// (or `fixed_fine_t` when non-empty). All rays must hit the scene cube.
RayBatchOutput forward_rays(const Model& model, const TapeParams& tp, ad::Var cond, ad::Var latent,
                            const std::vector<render::Ray>& rays,
                            const std::vector<std::vector<double>>& coarse_t, const FineSampler& sampler,
                            const std::vector<std::vector<double>>& fixed_fine_t, const Vec3& background);

struct FrameInputs {
  int identity = 0;
  Vec expression;
  Vec latent;
};

struct ModelRenderOptions {
  int n_coarse = 16;
  int n_fine = 32;
  bool jitter = false;
  std::uint64_t seed = 0;
  std::uint64_t frame = 0;
  std::uint64_t step = 0;
  int threads = 1;
  double half_extent = 1.0;
  Vec3 background{0.1, 0.1, 0.1};
  int rays_per_chunk = 512;
};

/// Hierarchical render of every pixel; deterministic for fixed options.
render::RenderResult render_image(const Model& model, const render::CameraPose& pose,
                                  const FrameInputs& inputs, const ModelRenderOptions& opts);

}  // namespace minerf

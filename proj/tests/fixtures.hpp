// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small run configurations shared by the test binaries.

#include "minerf/config.hpp"
#include "minerf/model.hpp"
#include "minerf/synthscene.hpp"

namespace testsupport {

/// Seconds-scale configuration: 16x16 frames, a narrow field and few rays.
inline minerf::RunConfig tiny_config(std::uint64_t seed = 3) {
  minerf::RunConfig c;
  c.seed = seed;
  c.scene.seed = seed;
  c.scene.n_frames = 8;
  c.scene.width = 16;
  c.scene.height = 16;
  c.scene.d = 4;
  c.scene.gt_samples = 64;
  c.conditioning.dims.d = 4;
  c.conditioning.dims.k = 3;
  c.conditioning.dims.d_latent = 3;
  c.field.layers = 2;
  c.field.hidden = 16;
  c.field.Lx = 4;
  c.field.Lv = 1;
  c.field.color_layers = 1;
  c.field.color_hidden = 8;
  c.render.n_coarse = 8;
  c.render.n_fine = 8;
  c.train.rays = 32;
  c.train.steps = 20;
  c.train.log_every = 5;
  c.train.test_every = 0;
  c.train.seed = seed;
  return c;
}

inline std::vector<minerf::IdentitySlot> slots_of(const minerf::scene::Dataset& data) {
  std::vector<minerf::IdentitySlot> out;
  for (const auto& id : data.identities) out.push_back({id.name, static_cast<int>(id.frames.size()), id.n_train()});
  return out;
}

}  // namespace testsupport

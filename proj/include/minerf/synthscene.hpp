// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Procedural multi-identity dynamic scenes. Each identity is a soft
// ellipsoid with its own semi-axes, color and density scale; a shared basis
// of radial-bump deformation modes, driven by the expression vector, warps
// the shape and tints a patch of the surface.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minerf/image.hpp"
#include "minerf/linalg.hpp"
#include "minerf/renderer.hpp"

namespace minerf::scene {

struct IdentityShape {
  Vec3 semi_axes;
  Vec3 base_color;
  double density_scale = 25.0;
};

struct DeformMode {
  Vec3 center;
  Vec3 direction;  // unit displacement direction
  double width = 0.18;
  double amplitude = 0.12;
  Vec3 tint;  // color offset at full activation
};

struct SceneSpec {
  std::vector<IdentityShape> identities;
  std::vector<DeformMode> modes;
  Vec3 background{0.1, 0.1, 0.1};
  double half_extent = 1.0;

  int n_modes() const { return static_cast<int>(modes.size()); }
};

struct SceneConfig {
  int n_identities = 2;
  int n_frames = 60;
  int width = 32;
  int height = 32;
  int d = 8;                  // expression modes
  int gt_samples = 256;       // samples per ray for ground truth
  double focal_scale = 1.2;   // focal length in units of image width
  double orbit_radius = 3.0;
  double yaw_amplitude = 0.45;    // radians
  double pitch_amplitude = 0.15;  // radians
  double orbit_cycles = 1.0;      // yaw oscillations across the clip
  double smoothing = 0.15;        // one-pole coefficient of the two-pole filter
  double test_fraction = 0.1;
  double mode_amplitude = 0.12;
  double mode_width = 0.18;
  double tint_strength = 0.35;
  std::array<double, 3> background{0.1, 0.1, 0.1};
  std::uint64_t seed = 0;

  void validate() const;
};

struct FieldSample {
  Vec3 rgb;
  double sigma;
};

/// Displacement sum_m e_m * amp_m * dir_m * exp(-|x - c_m|^2 / (2 w_m^2)).
Vec3 deformation(const SceneSpec& spec, const Vec& e, const Vec3& x);

/// sigma = s * max(0, 1 - q), q = sum_c ((x_c - D_c) / a_c)^2; color is the
/// base color plus mode-weighted tints, clamped to [0,1].
FieldSample analytic_field(const SceneSpec& spec, int identity, const Vec& e, const Vec3& x);

/// Deterministic scene spec drawn from config.seed.
SceneSpec make_scene_spec(const SceneConfig& cfg);

/// Smooth trajectory in [-1,1]^d: Gaussian noise through two cascaded
/// one-pole low-pass filters, rescaled per coordinate.
std::vector<Vec> expression_trajectory(const SceneConfig& cfg, int identity);
std::vector<render::CameraPose> camera_orbit(const SceneConfig& cfg, int identity);
render::Intrinsics intrinsics(const SceneConfig& cfg);

/// Pixel rectangle [row0, row1) x [col0, col1) covering the identity's
/// maximal deformed extent.
struct PixelBox {
  int row0 = 0, row1 = 0, col0 = 0, col1 = 0;
  bool contains(int row, int col) const { return row >= row0 && row < row1 && col >= col0 && col < col1; }
  int area() const { return std::max(0, row1 - row0) * std::max(0, col1 - col0); }
};
PixelBox head_box(const SceneSpec& spec, int identity, const render::CameraPose& pose);

render::RenderOptions ground_truth_options(const SceneConfig& cfg, int n_samples = 0);

/// Ground-truth render of the analytic field.
Image render_ground_truth(const SceneSpec& spec, int identity, const Vec& e,
                          const render::CameraPose& pose, const render::RenderOptions& opts);

struct Frame {
  int index = 0;
  Image image;
  render::CameraPose pose;
  Vec expression;
  PixelBox box;
};

struct IdentityData {
  std::string name;
  std::vector<Frame> frames;
  int n_test = 0;  // the last n_test frames are held out

  int n_train() const { return static_cast<int>(frames.size()) - n_test; }
  bool is_test(int frame) const { return frame >= n_train(); }
};

struct Dataset {
  SceneConfig config;
  SceneSpec spec;
  std::vector<IdentityData> identities;

  int find_identity(std::string_view name) const;  // -1 if absent
  std::size_t frame_count() const;
};

std::string identity_name(int index);
int test_count(int n_frames, double test_fraction);

/// Builds the dataset; images are skipped when render_images is false.
Dataset make_dataset(const SceneConfig& cfg, bool render_images = true, int threads = 1);

nlohmann::json to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const render::CameraPose& pose);
render::CameraPose pose_from_json(const nlohmann::json& j);

/// One directory per identity with meta.json and frame_XXXX.ppm. Returns a
/// 64-bit FNV-1a checksum over every byte written, in write order.
std::uint64_t save_dataset(const Dataset& data, const std::filesystem::path& root);
/// Images come back 8-bit quantized.
Dataset load_dataset(const std::filesystem::path& root);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace minerf::scene

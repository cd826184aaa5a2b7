// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "minerf/errors.hpp"
#include "minerf/image.hpp"
#include "minerf/rng.hpp"
#include "minerf/synthscene.hpp"
#include "support.hpp"

using namespace minerf;
using namespace minerf::scene;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene(int frames = 10) {
  SceneConfig c;
  c.n_frames = frames;
  c.width = 16;
  c.height = 16;
  c.seed = 11;
  return c;
}

double max_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

double l2(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) s += (a.data()[k] - b.data()[k]) * (a.data()[k] - b.data()[k]);
  return std::sqrt(s);
}

Vec3 random_point(Rng& rng) { return Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)); }

}  // namespace

TEST_CASE("analytic field examples") {
  const SceneSpec spec = make_scene_spec(small_scene());
  const Vec e0 = Vec::Zero(spec.n_modes());
  for (int j = 0; j < 2; ++j) {
    const auto& id = spec.identities[static_cast<std::size_t>(j)];
    const auto c = analytic_field(spec, j, e0, Vec3::Zero());
    CHECK(c.sigma == id.density_scale);
    CHECK(c.rgb == id.base_color);
    double peak = 0.0;
    Rng rng(70);
    for (int n = 0; n < 2000; ++n) peak = std::max(peak, analytic_field(spec, j, e0, random_point(rng)).sigma);
    CHECK(peak <= id.density_scale);
    CHECK(analytic_field(spec, j, e0, Vec3(0.99, 0.99, 0.99)).sigma == 0.0);
    CHECK(analytic_field(spec, j, Vec::Ones(spec.n_modes()), Vec3(5, 5, 5)).sigma == 0.0);
  }
}

TEST_CASE("deformed support stays inside the cube") {
  const SceneSpec spec = make_scene_spec(small_scene());
  Rng rng(71);
  for (int n = 0; n < 4000; ++n) {
    Vec e(spec.n_modes());
    for (int m = 0; m < e.size(); ++m) e[m] = rng.below(2) ? 1.0 : -1.0;
    // A point on a random face of the cube.
    Vec3 x = random_point(rng);
    x[static_cast<int>(rng.below(3))] = rng.below(2) ? 1.0 : -1.0;
    CHECK(analytic_field(spec, static_cast<int>(rng.below(2)), e, x).sigma == 0.0);
  }
}

TEST_CASE("analytic field is continuous in the expression") {
  const SceneSpec spec = make_scene_spec(small_scene());
  Rng rng(72);
  // Lipschitz ratio stays bounded as the perturbation shrinks.
  double worst[3] = {0, 0, 0};
  const double eps[3] = {1e-3, 1e-5, 1e-7};
  for (int n = 0; n < 300; ++n) {
    const Vec3 x = random_point(rng) * 0.8;
    const Vec e = testsupport::random_vec(spec.n_modes(), rng);
    const Vec dir = testsupport::random_vec(spec.n_modes(), rng).normalized();
    const auto a = analytic_field(spec, 0, e, x);
    for (int k = 0; k < 3; ++k) {
      const auto b = analytic_field(spec, 0, e + eps[k] * dir, x);
      const double d = std::abs(a.sigma - b.sigma) + (a.rgb - b.rgb).norm();
      worst[k] = std::max(worst[k], d / eps[k]);
    }
  }
  CHECK(worst[0] < 1e3);
  CHECK(worst[1] < 1e3);
  CHECK(worst[2] < 1e3);
}

TEST_CASE("density scale controls the center density") {
  SceneSpec spec = make_scene_spec(small_scene());
  spec.identities[0].density_scale = 3.25;
  CHECK(analytic_field(spec, 0, Vec::Zero(spec.n_modes()), Vec3::Zero()).sigma == 3.25);
}

TEST_CASE("expression trajectories are bounded and smooth") {
  const SceneConfig cfg = small_scene(60);
  for (int j = 0; j < 2; ++j) {
    const auto traj = expression_trajectory(cfg, j);
    REQUIRE(traj.size() == 60);
    double step = 0.0;
    for (std::size_t f = 0; f < traj.size(); ++f) {
      CHECK(traj[f].size() == cfg.d);
      CHECK(traj[f].cwiseAbs().maxCoeff() <= 1.0);
      if (f > 0) step = std::max(step, (traj[f] - traj[f - 1]).cwiseAbs().maxCoeff());
    }
    CHECK(step < 1.0);
  }
}

TEST_CASE("dataset determinism, splits and identity dependence") {
  const SceneConfig cfg = small_scene();
  const Dataset a = make_dataset(cfg);
  const Dataset b = make_dataset(cfg, true, 3);
  REQUIRE(a.identities.size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto& ia = a.identities[j];
    CHECK(ia.frames.size() == 10);
    CHECK(ia.n_test == 1);
    CHECK(ia.n_train() + ia.n_test == 10);
    CHECK_FALSE(ia.is_test(8));
    CHECK(ia.is_test(9));
    for (std::size_t f = 0; f < ia.frames.size(); ++f) {
      CHECK(ia.frames[f].image == b.identities[j].frames[f].image);
      CHECK(ia.frames[f].expression == b.identities[j].frames[f].expression);
    }
  }
  CHECK(test_count(60, 0.1) == 6);
  CHECK(a.find_identity(identity_name(1)) == 1);
  CHECK(a.find_identity("nobody") == -1);

  // Same expression and pose, different identity shape: images differ.
  const auto& f0 = a.identities[0].frames[0];
  const auto opts = ground_truth_options(cfg);
  const Image other = render_ground_truth(a.spec, 1, f0.expression, f0.pose, opts);
  CHECK(l2(other, f0.image) > 0.0);

  SceneConfig cfg2 = cfg;
  cfg2.seed = 12;
  CHECK(l2(make_dataset(cfg2).identities[0].frames[0].image, f0.image) > 0.0);
}

TEST_CASE("ground truth is reproduced exactly from the analytic field") {
  const SceneConfig cfg = small_scene();
  const Dataset data = make_dataset(cfg);
  for (const auto& id : data.identities) {
    const int j = data.find_identity(id.name);
    for (const auto& fr : id.frames) {
      auto o = ground_truth_options(cfg);
      o.frame = static_cast<std::uint64_t>(fr.index);
      CHECK(render_ground_truth(data.spec, j, fr.expression, fr.pose, o) == fr.image);
    }
  }
}

TEST_CASE("ground-truth quadrature converges from 256 to 512 samples") {
  const SceneConfig cfg = small_scene();
  const Dataset data = make_dataset(cfg, false);
  for (int j = 0; j < 2; ++j) {
    const auto& fr = data.identities[static_cast<std::size_t>(j)].frames[3];
    const Image a = render_ground_truth(data.spec, j, fr.expression, fr.pose, ground_truth_options(cfg, 256));
    const Image b = render_ground_truth(data.spec, j, fr.expression, fr.pose, ground_truth_options(cfg, 512));
    CHECK(max_diff(a, b) < 2e-3);
  }
}

TEST_CASE("without expression modes frames depend only on the pose") {
  const SceneConfig cfg = small_scene();
  SceneSpec spec = make_scene_spec(cfg);
  for (auto& m : spec.modes) {
    m.amplitude = 0.0;
    m.tint = Vec3::Zero();
  }
  const auto poses = camera_orbit(cfg, 0);
  const auto traj = expression_trajectory(cfg, 0);
  const auto o = ground_truth_options(cfg, 64);
  CHECK(render_ground_truth(spec, 0, traj[1], poses[4], o) == render_ground_truth(spec, 0, traj[7], poses[4], o));
}

TEST_CASE("head box covers every pixel the identity touches") {
  const SceneConfig cfg = small_scene();
  const Dataset data = make_dataset(cfg);
  const Vec3 bg(cfg.background[0], cfg.background[1], cfg.background[2]);
  for (const auto& id : data.identities) {
    for (const auto& fr : id.frames) {
      CHECK(fr.box.area() > 0);
      CHECK(fr.box.area() < cfg.width * cfg.height);
      for (int r = 0; r < cfg.height; ++r) {
        for (int c = 0; c < cfg.width; ++c) {
          if (!fr.box.contains(r, c)) CHECK((fr.image.pixel(r, c) - bg).cwiseAbs().maxCoeff() < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("dataset round trip on disk") {
  const SceneConfig cfg = small_scene(5);
  const Dataset data = make_dataset(cfg);
  const fs::path root = fs::temp_directory_path() / "minerf_dataset_test";
  fs::remove_all(root);
  const auto sum1 = save_dataset(data, root);
  CHECK(fs::exists(root / identity_name(0) / "meta.json"));
  CHECK(fs::exists(root / identity_name(1) / "frame_0004.ppm"));
  const Dataset back = load_dataset(root);
  CHECK(back.identities.size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t f = 0; f < 5; ++f) {
      const auto& a = data.identities[j].frames[f];
      const auto& b = back.identities[j].frames[f];
      CHECK(a.expression == b.expression);
      CHECK(a.pose.R == b.pose.R);
      CHECK(a.pose.t == b.pose.t);
      CHECK(max_diff(a.image, b.image) <= 0.5 / 255.0 + 1e-12);
    }
    CHECK(back.identities[j].n_test == data.identities[j].n_test);
  }
  CHECK(to_json(back.spec) == to_json(data.spec));
  const fs::path root2 = root.string() + "_b";
  fs::remove_all(root2);
  CHECK(save_dataset(make_dataset(cfg), root2) == sum1);
  fs::remove_all(root);
  fs::remove_all(root2);
  CHECK_THROWS(load_dataset(root));
}

TEST_CASE("scene config validation and json") {
  SceneConfig c = small_scene();
  CHECK(scene_config_from_json(to_json(c)).seed == c.seed);
  c.n_identities = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_scene();
  c.width = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("ppm codec") {
  Image img(3, 2);
  img.set_pixel(0, 0, Vec3(1, 0, 0.5));
  img.set_pixel(1, 2, Vec3(-1, 2, 0.25));
  const auto bytes = encode_ppm(img);
  const std::string header = "P6\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 18);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
  CHECK(bytes[header.size()] == 255);
  CHECK(bytes[header.size() + 2] == 128);
  const Image back = decode_ppm(bytes);
  CHECK(back.pixel(1, 2) == Vec3(0, 1, 64 / 255.0));
  CHECK(quantize8(std::nan("")) == 0);
}

// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "minerf/synthscene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "minerf/errors.hpp"
#include "minerf/rng.hpp"

namespace minerf::scene {

using nlohmann::json;

namespace {

constexpr std::uint64_t kShapeStream = 0x5348;
constexpr std::uint64_t kModeStream = 0x4d4f;
constexpr std::uint64_t kExprStream = 0x4558;
constexpr std::uint64_t kOrbitStream = 0x4f52;

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

void SceneConfig::validate() const {
  if (n_identities < 1) throw ConfigError("scene.n_identities must be >= 1");
  if (n_frames < 1) throw ConfigError("scene.n_frames must be >= 1");
  if (width < 1 || height < 1) throw ConfigError("scene resolution must be positive");
  if (d < 1) throw ConfigError("scene.d must be >= 1");
  if (gt_samples < 1) throw ConfigError("scene.gt_samples must be >= 1");
  if (!(orbit_radius > std::sqrt(3.0))) throw ConfigError("scene.orbit_radius must clear the scene cube");
  if (!(smoothing > 0.0 && smoothing <= 1.0)) throw ConfigError("scene.smoothing must be in (0, 1]");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("scene.test_fraction must be in [0, 1)");
  if (!(focal_scale > 0.0)) throw ConfigError("scene.focal_scale must be positive");
}

Vec3 deformation(const SceneSpec& spec, const Vec& e, const Vec3& x) {
  Vec3 disp = Vec3::Zero();
  const auto n = std::min<Eigen::Index>(e.size(), spec.n_modes());
  for (Eigen::Index m = 0; m < n; ++m) {
    const auto& mode = spec.modes[static_cast<std::size_t>(m)];
    const double g = std::exp(-(x - mode.center).squaredNorm() / (2.0 * mode.width * mode.width));
    disp += e[m] * mode.amplitude * g * mode.direction;
  }
  return disp;
}

FieldSample analytic_field(const SceneSpec& spec, int identity, const Vec& e, const Vec3& x) {
  if (identity < 0 || identity >= static_cast<int>(spec.identities.size())) {
    throw UsageError("analytic_field: identity index out of range");
  }
  const auto& id = spec.identities[static_cast<std::size_t>(identity)];
  Vec3 rgb = id.base_color;
  Vec3 disp = Vec3::Zero();
  const auto n = std::min<Eigen::Index>(e.size(), spec.n_modes());
  for (Eigen::Index m = 0; m < n; ++m) {
    const auto& mode = spec.modes[static_cast<std::size_t>(m)];
    const double g = std::exp(-(x - mode.center).squaredNorm() / (2.0 * mode.width * mode.width));
    disp += e[m] * mode.amplitude * g * mode.direction;
    rgb += e[m] * g * mode.tint;
  }
  const Vec3 local = (x - disp).cwiseQuotient(id.semi_axes);
  const double q = local.squaredNorm();
  return {rgb.cwiseMax(0.0).cwiseMin(1.0), id.density_scale * std::max(0.0, 1.0 - q)};
}

SceneSpec make_scene_spec(const SceneConfig& cfg) {
  cfg.validate();
  SceneSpec spec;
  spec.background = Vec3(cfg.background[0], cfg.background[1], cfg.background[2]);
  for (int j = 0; j < cfg.n_identities; ++j) {
    Rng rng(cfg.seed, {kShapeStream, std::uint64_t(j)});
    IdentityShape s;
    s.semi_axes = Vec3(rng.uniform(0.42, 0.62), rng.uniform(0.50, 0.70), rng.uniform(0.40, 0.60));
    s.base_color = Vec3(rng.uniform(0.25, 0.9), rng.uniform(0.25, 0.9), rng.uniform(0.25, 0.9));
    s.density_scale = rng.uniform(20.0, 30.0);
    spec.identities.push_back(s);
  }
  // Mode centers on a Fibonacci lattice over the camera-facing hemisphere.
  Rng rng(cfg.seed, {kModeStream});
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int m = 0; m < cfg.d; ++m) {
    const double z = 1.0 - (m + 0.5) / cfg.d;  // (0, 1]
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * m;
    const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
    DeformMode mode;
    mode.direction = dir.normalized();
    mode.center = 0.5 * mode.direction;
    mode.width = cfg.mode_width;
    mode.amplitude = cfg.mode_amplitude;
    mode.tint = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)) *
                cfg.tint_strength;
    spec.modes.push_back(mode);
  }
  return spec;
}

std::vector<Vec> expression_trajectory(const SceneConfig& cfg, int identity) {
  Rng rng(cfg.seed, {kExprStream, std::uint64_t(identity)});
  const int burn_in = static_cast<int>(std::ceil(4.0 / cfg.smoothing));
  Vec y1 = Vec::Zero(cfg.d);
  Vec y2 = Vec::Zero(cfg.d);
  std::vector<Vec> out;
  for (int f = -burn_in; f < cfg.n_frames; ++f) {
    Vec noise(cfg.d);
    for (int c = 0; c < cfg.d; ++c) noise[c] = rng.normal();
    y1 += cfg.smoothing * (noise - y1);
    y2 += cfg.smoothing * (y1 - y2);
    if (f >= 0) out.push_back(y2);
  }
  for (int c = 0; c < cfg.d; ++c) {
    double peak = 0.0;
    for (const Vec& v : out) peak = std::max(peak, std::abs(v[c]));
    if (peak > 0.0) {
      for (Vec& v : out) v[c] /= peak;
    }
  }
  return out;
}

render::Intrinsics intrinsics(const SceneConfig& cfg) {
  render::Intrinsics K;
  K.width = cfg.width;
  K.height = cfg.height;
  K.focal = cfg.focal_scale * cfg.width;
  K.cx = 0.5 * cfg.width;
  K.cy = 0.5 * cfg.height;
  return K;
}

std::vector<render::CameraPose> camera_orbit(const SceneConfig& cfg, int identity) {
  Rng rng(cfg.seed, {kOrbitStream, std::uint64_t(identity)});
  const double yaw_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double pitch_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const auto K = intrinsics(cfg);
  std::vector<render::CameraPose> poses;
  for (int f = 0; f < cfg.n_frames; ++f) {
    const double s = static_cast<double>(f) / cfg.n_frames;
    const double yaw = cfg.yaw_amplitude * std::sin(2.0 * std::numbers::pi * cfg.orbit_cycles * s + yaw_phase);
    const double pitch = cfg.pitch_amplitude * std::sin(4.0 * std::numbers::pi * s + pitch_phase);
    poses.push_back(render::orbit_pose(yaw, pitch, cfg.orbit_radius, K));
  }
  return poses;
}

PixelBox head_box(const SceneSpec& spec, int identity, const render::CameraPose& pose) {
  const auto& id = spec.identities.at(static_cast<std::size_t>(identity));
  double margin = 0.0;
  for (const auto& m : spec.modes) margin = std::max(margin, m.amplitude);
  const Vec3 ext = id.semi_axes + Vec3::Constant(1.1 * margin);
  double umin = 1e30, umax = -1e30, vmin = 1e30, vmax = -1e30;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1 ? 1 : -1) * ext[0], (corner & 2 ? 1 : -1) * ext[1], (corner & 4 ? 1 : -1) * ext[2]);
    const Vec3 c = pose.R.transpose() * (p - pose.t);
    const double depth = -c[2];
    if (depth <= 1e-9) return {0, pose.K.height, 0, pose.K.width};
    const double u = pose.K.focal * c[0] / depth + pose.K.cx;
    const double v = -pose.K.focal * c[1] / depth + pose.K.cy;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  PixelBox box;
  box.row0 = std::clamp(static_cast<int>(std::floor(vmin)), 0, pose.K.height);
  box.row1 = std::clamp(static_cast<int>(std::ceil(vmax)), 0, pose.K.height);
  box.col0 = std::clamp(static_cast<int>(std::floor(umin)), 0, pose.K.width);
  box.col1 = std::clamp(static_cast<int>(std::ceil(umax)), 0, pose.K.width);
  return box;
}

render::RenderOptions ground_truth_options(const SceneConfig& cfg, int n_samples) {
  render::RenderOptions opts;
  opts.n_samples = n_samples > 0 ? n_samples : cfg.gt_samples;
  opts.jitter = false;
  opts.seed = cfg.seed;
  return opts;
}

Image render_ground_truth(const SceneSpec& spec, int identity, const Vec& e,
                          const render::CameraPose& pose, const render::RenderOptions& opts) {
  render::PointField field = [&](const Mat& points, const Mat&, Mat& rgb, Vec& sigma) {
    rgb.resize(points.rows(), 3);
    sigma.resize(points.rows());
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      const auto s = analytic_field(spec, identity, e, points.row(r).transpose());
      rgb.row(r) = s.rgb.transpose();
      sigma[r] = s.sigma;
    }
  };
  render::RenderOptions o = opts;
  o.half_extent = spec.half_extent;
  return render::render_field(field, pose, spec.background, o).image;
}

std::string identity_name(int index) {
  std::string s = std::to_string(index);
  if (s.size() < 2) s.insert(s.begin(), 2 - s.size(), '0');
  return "id" + s;
}

int test_count(int n_frames, double test_fraction) {
  if (n_frames < 2 || test_fraction <= 0.0) return 0;
  return std::clamp(static_cast<int>(std::lround(n_frames * test_fraction)), 1, n_frames - 1);
}

int Dataset::find_identity(std::string_view name) const {
  for (std::size_t j = 0; j < identities.size(); ++j) {
    if (identities[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

std::size_t Dataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& id : identities) n += id.frames.size();
  return n;
}

Dataset make_dataset(const SceneConfig& cfg, bool render_images, int threads) {
  cfg.validate();
  Dataset data;
  data.config = cfg;
  data.spec = make_scene_spec(cfg);
  const auto gt = [&] {
    auto o = ground_truth_options(cfg);
    o.threads = threads;
    return o;
  }();
  for (int j = 0; j < cfg.n_identities; ++j) {
    IdentityData id;
    id.name = identity_name(j);
    id.n_test = test_count(cfg.n_frames, cfg.test_fraction);
    const auto expr = expression_trajectory(cfg, j);
    const auto poses = camera_orbit(cfg, j);
    for (int f = 0; f < cfg.n_frames; ++f) {
      Frame frame;
      frame.index = f;
      frame.pose = poses[static_cast<std::size_t>(f)];
      frame.expression = expr[static_cast<std::size_t>(f)];
      frame.box = head_box(data.spec, j, frame.pose);
      if (render_images) {
        auto o = gt;
        o.frame = static_cast<std::uint64_t>(f);
        frame.image = render_ground_truth(data.spec, j, frame.expression, frame.pose, o);
      }
      id.frames.push_back(std::move(frame));
    }
    data.identities.push_back(std::move(id));
  }
  return data;
}

// --- serialization ----------------------------------------------------------

json to_json(const SceneConfig& c) {
  return json{{"n_identities", c.n_identities},
              {"n_frames", c.n_frames},
              {"width", c.width},
              {"height", c.height},
              {"d", c.d},
              {"gt_samples", c.gt_samples},
              {"focal_scale", c.focal_scale},
              {"orbit_radius", c.orbit_radius},
              {"yaw_amplitude", c.yaw_amplitude},
              {"pitch_amplitude", c.pitch_amplitude},
              {"orbit_cycles", c.orbit_cycles},
              {"smoothing", c.smoothing},
              {"test_fraction", c.test_fraction},
              {"mode_amplitude", c.mode_amplitude},
              {"mode_width", c.mode_width},
              {"tint_strength", c.tint_strength},
              {"background", c.background},
              {"seed", c.seed}};
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("scene: unknown key '" + key + "'");
  }
  try {
    c.n_identities = j.value("n_identities", c.n_identities);
    c.n_frames = j.value("n_frames", c.n_frames);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.d = j.value("d", c.d);
    c.gt_samples = j.value("gt_samples", c.gt_samples);
    c.focal_scale = j.value("focal_scale", c.focal_scale);
    c.orbit_radius = j.value("orbit_radius", c.orbit_radius);
    c.yaw_amplitude = j.value("yaw_amplitude", c.yaw_amplitude);
    c.pitch_amplitude = j.value("pitch_amplitude", c.pitch_amplitude);
    c.orbit_cycles = j.value("orbit_cycles", c.orbit_cycles);
    c.smoothing = j.value("smoothing", c.smoothing);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.mode_amplitude = j.value("mode_amplitude", c.mode_amplitude);
    c.mode_width = j.value("mode_width", c.mode_width);
    c.tint_strength = j.value("tint_strength", c.tint_strength);
    c.background = j.value("background", c.background);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("scene: ") + ex.what());
  }
  return c;
}

json to_json(const SceneSpec& s) {
  json ids = json::array();
  for (const auto& id : s.identities) {
    ids.push_back({{"semi_axes", vec_json(id.semi_axes)},
                   {"base_color", vec_json(id.base_color)},
                   {"density_scale", id.density_scale}});
  }
  json modes = json::array();
  for (const auto& m : s.modes) {
    modes.push_back({{"center", vec_json(m.center)},
                     {"direction", vec_json(m.direction)},
                     {"width", m.width},
                     {"amplitude", m.amplitude},
                     {"tint", vec_json(m.tint)}});
  }
  return json{{"identities", ids}, {"modes", modes}, {"background", vec_json(s.background)},
              {"half_extent", s.half_extent}};
}

SceneSpec scene_spec_from_json(const json& j) {
  SceneSpec s;
  for (const auto& id : j.at("identities")) {
    s.identities.push_back({vec3_from(id.at("semi_axes")), vec3_from(id.at("base_color")),
                            id.at("density_scale").get<double>()});
  }
  for (const auto& m : j.at("modes")) {
    s.modes.push_back({vec3_from(m.at("center")), vec3_from(m.at("direction")), m.at("width").get<double>(),
                       m.at("amplitude").get<double>(), vec3_from(m.at("tint"))});
  }
  s.background = vec3_from(j.at("background"));
  s.half_extent = j.at("half_extent").get<double>();
  return s;
}

json to_json(const render::CameraPose& p) {
  json R = json::array();
  for (int r = 0; r < 3; ++r) R.push_back(json::array({p.R(r, 0), p.R(r, 1), p.R(r, 2)}));
  return json{{"R", R},
              {"t", vec_json(p.t)},
              {"focal", p.K.focal},
              {"cx", p.K.cx},
              {"cy", p.K.cy},
              {"width", p.K.width},
              {"height", p.K.height}};
}

render::CameraPose pose_from_json(const json& j) {
  render::CameraPose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.R(r, c) = j.at("R").at(r).at(c).get<double>();
  }
  p.t = vec3_from(j.at("t"));
  p.K.focal = j.at("focal").get<double>();
  p.K.cx = j.at("cx").get<double>();
  p.K.cy = j.at("cy").get<double>();
  p.K.width = j.at("width").get<int>();
  p.K.height = j.at("height").get<int>();
  return p;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string frame_file(int index) {
  std::string s = std::to_string(index);
  if (s.size() < 4) s.insert(s.begin(), 4 - s.size(), '0');
  return "frame_" + s + ".ppm";
}

void write_bytes(const std::filesystem::path& p, std::span<const std::uint8_t> bytes, std::uint64_t& h) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw UsageError("cannot write " + p.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw UsageError("write failed for " + p.string());
  h = fnv1a(bytes, h);
}

void write_text(const std::filesystem::path& p, const std::string& s, std::uint64_t& h) {
  write_bytes(p, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), h);
}

json read_json(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw UsageError("cannot read " + p.string());
  try {
    return json::parse(f);
  } catch (const json::exception& ex) {
    throw UsageError("malformed JSON in " + p.string() + ": " + ex.what());
  }
}

}  // namespace

std::uint64_t save_dataset(const Dataset& data, const std::filesystem::path& root) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw UsageError("cannot create " + root.string() + ": " + ec.message());
  std::uint64_t h = 0xcbf29ce484222325ULL;

  json index{{"scene_config", to_json(data.config)}, {"scene_spec", to_json(data.spec)}, {"identities", json::array()}};
  for (const auto& id : data.identities) index["identities"].push_back(id.name);
  write_text(root / "dataset.json", index.dump(2) + "\n", h);

  for (std::size_t j = 0; j < data.identities.size(); ++j) {
    const auto& id = data.identities[j];
    const auto dir = root / id.name;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create " + dir.string() + ": " + ec.message());
    json meta{{"name", id.name},
              {"identity_index", j},
              {"n_frames", id.frames.size()},
              {"n_test", id.n_test},
              {"scene_config", to_json(data.config)},
              {"scene_spec", to_json(data.spec)}};
    json train = json::array(), test = json::array(), frames = json::array();
    for (const auto& f : id.frames) {
      (id.is_test(f.index) ? test : train).push_back(f.index);
      frames.push_back({{"index", f.index},
                        {"file", frame_file(f.index)},
                        {"pose", to_json(f.pose)},
                        {"expression", std::vector<double>(f.expression.data(), f.expression.data() + f.expression.size())},
                        {"box", {f.box.row0, f.box.row1, f.box.col0, f.box.col1}}});
    }
    meta["split"] = {{"train", train}, {"test", test}};
    meta["frames"] = frames;
    write_text(dir / "meta.json", meta.dump(2) + "\n", h);
    for (const auto& f : id.frames) {
      if (f.image.empty()) continue;
      write_bytes(dir / frame_file(f.index), encode_ppm(f.image), h);
    }
  }
  return h;
}

Dataset load_dataset(const std::filesystem::path& root) {
  const json index = read_json(root / "dataset.json");
  Dataset data;
  data.config = scene_config_from_json(index.at("scene_config"));
  data.spec = scene_spec_from_json(index.at("scene_spec"));
  for (const auto& name_j : index.at("identities")) {
    const auto name = name_j.get<std::string>();
    const json meta = read_json(root / name / "meta.json");
    IdentityData id;
    id.name = name;
    id.n_test = meta.at("n_test").get<int>();
    for (const auto& fj : meta.at("frames")) {
      Frame f;
      f.index = fj.at("index").get<int>();
      f.pose = pose_from_json(fj.at("pose"));
      const auto e = fj.at("expression").get<std::vector<double>>();
      f.expression = Eigen::Map<const Vec>(e.data(), static_cast<Eigen::Index>(e.size()));
      const auto b = fj.at("box").get<std::vector<int>>();
      f.box = {b.at(0), b.at(1), b.at(2), b.at(3)};
      const auto img = root / name / fj.at("file").get<std::string>();
      if (std::filesystem::exists(img)) f.image = read_ppm(img);
      id.frames.push_back(std::move(f));
    }
    data.identities.push_back(std::move(id));
  }
  return data;
}

}  // namespace minerf::scene

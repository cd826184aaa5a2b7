// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "minerf/checkpoint.hpp"
#include "minerf/errors.hpp"
#include "minerf/trainer.hpp"
#include "support.hpp"

using namespace minerf;
using namespace minerf::train;
namespace fs = std::filesystem;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool same_values(const ParamStore& a, const ParamStore& b, std::string_view prefix) {
  for (const auto& name : a.names_with_prefix(prefix)) {
    if (!(a.at(name).value == b.at(name).value)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("loss examples") {
  ad::Tape t;
  const Mat target = Mat::Constant(2, 3, 0.5);
  const ad::Var perfect = t.constant(target);
  const ad::Var zero2 = t.constant(Mat::Zero(2, 1));
  const ad::Var preds[] = {perfect};
  CHECK(loss(preds, target, zero2, zero2, 0.01, 1e-4).total.scalar() == 0.0);

  Mat one = Mat::Zero(1, 3);
  Mat p = one;
  p(0, 0) = 0.1;
  const ad::Var pr[] = {t.constant(p)};
  CHECK(loss(pr, one, ad::Var(), ad::Var(), 0.0, 0.0).total.scalar() == doctest::Approx(0.01).epsilon(1e-14));

  Mat l(2, 1);
  l << 3, 4;
  const ad::Var z[] = {t.constant(one)};
  const auto lt = loss(z, one, t.constant(l), t.constant(Mat::Zero(3, 1)), 0.01, 1e-4);
  CHECK(lt.total.scalar() == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(lt.latent == 5.0);
  CHECK(loss(z, one, t.constant(l), ad::Var(), 0.01, 0.0, true).total.scalar() == doctest::Approx(0.25));

  // Coarse and fine terms add with equal weight.
  const ad::Var both[] = {t.constant(p), t.constant(p)};
  CHECK(loss(both, one, ad::Var(), ad::Var(), 0.0, 0.0).color == doctest::Approx(0.02));
  CHECK_THROWS_AS(loss(both, Mat::Zero(2, 3), ad::Var(), ad::Var(), 0.0, 0.0), DimensionError);
}

TEST_CASE("adam examples") {
  Mat w = Mat::Constant(2, 2, 1.5), m = Mat::Zero(2, 2), v = Mat::Zero(2, 2);
  adam_step(w, Mat::Zero(2, 2), m, v, 1, 0.1);
  CHECK(w == Mat::Constant(2, 2, 1.5));

  const AdamHyper h;
  for (double g : {0.5, -3.0, 1e-3}) {
    Mat x = Mat::Zero(1, 1), mm = Mat::Zero(1, 1), vv = Mat::Zero(1, 1);
    adam_step(x, Mat::Constant(1, 1, g), mm, vv, 1, 1e-3);
    const double update = -x(0, 0);
    CHECK(update == doctest::Approx(1e-3 * g / (std::abs(g) + h.eps)).epsilon(1e-14));
    const double alt = 1e-3 * g / (std::abs(g) + h.eps * std::sqrt(1 - h.beta2) / (1 - h.beta1));
    // The two closed forms differ only at order lr * eps / |g|.
    CHECK(std::abs(update - alt) <= 1e-3 * h.eps / std::abs(g));
    CHECK(std::abs(update - 1e-3 * (g > 0 ? 1 : -1)) < 1e-8);
  }

  Mat ws = Mat::Zero(1, 1), ms = Mat::Zero(1, 1), vs = Mat::Zero(1, 1);
  for (int t = 1; t <= 100; ++t) adam_step(ws, Mat::Constant(1, 1, 2.0 * (ws(0, 0) - 2.0)), ms, vs, t, 0.1);
  CHECK(std::abs(ws(0, 0) - 2.0) < 0.1);

  CHECK_THROWS_AS(adam_step(w, Mat::Zero(1, 2), m, v, 1, 0.1), DimensionError);
  Param p{"p", Mat::Zero(1, 1), Mat::Zero(1, 1), Mat::Zero(1, 1), 0};
  adam_step(p, Mat::Ones(1, 1), 0.01);
  adam_step(p, Mat::Ones(1, 1), 0.01);
  CHECK(p.adam_t == 2);
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(0, 3000, 5e-4, 5e-5) == 5e-4);
  CHECK(lr_schedule(3000, 3000, 5e-4, 5e-5) == 5e-5);
  CHECK(lr_schedule(1500, 3000, 5e-4, 5e-5) == doctest::Approx(std::sqrt(5e-4 * 5e-5)).epsilon(1e-12));
  CHECK(lr_schedule(1500, 3000, 5e-4, 5e-5) == doctest::Approx(1.581e-4).epsilon(1e-3));
  for (int s = 1; s <= 100; ++s) CHECK(lr_schedule(s, 100, 5e-4, 5e-5) < lr_schedule(s - 1, 100, 5e-4, 5e-5));
  CHECK_THROWS_AS(lr_schedule(-1, 10, 5e-4, 5e-5), UsageError);
  CHECK_THROWS_AS(lr_schedule(11, 10, 5e-4, 5e-5), UsageError);
}

TEST_CASE("step plans") {
  const RunConfig cfg = testsupport::tiny_config();
  const scene::Dataset data = scene::make_dataset(cfg.scene);
  const Checkpoint ckpt = initial_checkpoint(cfg, testsupport::slots_of(data));
  std::vector<const scene::IdentityData*> pool;
  for (const auto& id : data.identities) pool.push_back(&id);
  int seen[2] = {0, 0};
  for (int s = 0; s < 40; ++s) {
    const StepPlan p = plan_step(ckpt, pool, s, 5);
    REQUIRE(p.identity >= 0);
    REQUIRE(p.identity < 2);
    ++seen[p.identity];
    const auto& id = data.identities[static_cast<std::size_t>(p.identity)];
    CHECK_FALSE(id.is_test(p.frame));
    const auto& box = id.frames[static_cast<std::size_t>(p.frame)].box;
    int in_box = 0;
    for (int px : p.pixels) in_box += box.contains(px / cfg.scene.width, px % cfg.scene.width);
    CHECK(in_box >= static_cast<int>(std::llround(cfg.train.in_box_fraction * cfg.train.rays)));
    CHECK(p.targets.rows() == static_cast<Eigen::Index>(p.rays.size()));
    CHECK(p.coarse_t.size() == p.rays.size());
    // Same inputs, same plan.
    const StepPlan q = plan_step(ckpt, pool, s, 5);
    CHECK(q.pixels == p.pixels);
    CHECK(q.coarse_t == p.coarse_t);
  }
  CHECK(seen[0] > 0);
  CHECK(seen[1] > 0);
}

TEST_CASE("a step moves only the sampled identity code and frame latent") {
  const RunConfig cfg = testsupport::tiny_config();
  const scene::Dataset data = scene::make_dataset(cfg.scene);
  Checkpoint ckpt = initial_checkpoint(cfg, testsupport::slots_of(data));
  std::vector<const scene::IdentityData*> pool;
  for (const auto& id : data.identities) pool.push_back(&id);
  for (int s = 0; s < 6; ++s) {
    const Checkpoint before = ckpt;
    const StepPlan plan = plan_step(ckpt, pool, s, 9);
    train_step(ckpt, plan, 1e-3);
    const auto& a = before.model.params;
    const auto& b = ckpt.model.params;
    for (int j = 0; j < 2; ++j) {
      const bool mine = j == plan.identity;
      CHECK((a.at(Model::identity_param(j)).value == b.at(Model::identity_param(j)).value) != mine);
      for (int f = 0; f < cfg.scene.n_frames; ++f) {
        const auto name = Model::latent_param(j, f);
        if (!a.contains(name)) continue;
        CHECK((a.at(name).value == b.at(name).value) != (mine && f == plan.frame));
      }
    }
    CHECK_FALSE(same_values(a, b, "cond."));
    CHECK_FALSE(same_values(a, b, "fine."));

    const Checkpoint frozen_before = ckpt;
    train_step(ckpt, plan_step(ckpt, pool, s + 100, 9), 1e-3, {"cond.", "coarse."});
    CHECK(same_values(frozen_before.model.params, ckpt.model.params, "cond."));
    CHECK(same_values(frozen_before.model.params, ckpt.model.params, "coarse."));
  }
}

TEST_CASE("end-to-end gradient on a 16-parameter probe") {
  RunConfig cfg = testsupport::tiny_config();
  const scene::Dataset data = scene::make_dataset(cfg.scene);
  const Checkpoint ckpt = initial_checkpoint(cfg, testsupport::slots_of(data));
  std::vector<const scene::IdentityData*> pool{&data.identities[0]};
  const StepPlan plan = plan_step(ckpt, pool, 0, 1);

  // Reference pass fixes the fine t-values so the check sees a smooth loss.
  ad::Tape ref_tape;
  const auto fine_t = step_loss(ref_tape, ckpt, plan, false).fine_t;

  Rng rng(17);
  const auto& all = ckpt.model.params.all();
  std::vector<std::string> names;
  std::vector<Mat> values;
  std::vector<ad::ProbeEntry> probe;
  for (int n = 0; n < 16; ++n) {
    const auto& p = all[rng.below(all.size())];
    const auto it = std::find(names.begin(), names.end(), p.name);
    std::size_t idx = static_cast<std::size_t>(it - names.begin());
    if (it == names.end()) {
      names.push_back(p.name);
      values.push_back(p.value);
    }
    probe.emplace_back(idx, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.value.size()))));
  }
  const ad::ScalarFn f = [&](ad::Tape& t, std::span<const ad::Var> vs) {
    cond::VarMap overrides;
    for (std::size_t k = 0; k < names.size(); ++k) overrides[names[k]] = vs[k];
    return step_loss(t, ckpt, plan, false, &overrides, &fine_t).terms.total;
  };
  const auto rep = ad::finite_diff_check(f, values, probe, 1e-6, 1e-3);
  CHECK(rep.pass);
  CHECK(rep.checked == 16);
}

TEST_CASE("training runs") {
  RunConfig cfg = testsupport::tiny_config();
  const scene::Dataset data = scene::make_dataset(cfg.scene);
  SUBCASE("zero steps equal the initialization") {
    cfg.train.steps = 0;
    const auto r = train::train(data, cfg);
    CHECK(encode_checkpoint(r.ckpt) == encode_checkpoint(initial_checkpoint(cfg, testsupport::slots_of(data))));
    CHECK(r.log.empty());
  }
  SUBCASE("deterministic reruns are byte identical") {
    cfg.train.steps = 12;
    cfg.train.test_every = 6;
    std::vector<LogRow> hooked;
    const auto a = train::train(data, cfg, TrainHooks{[&](const LogRow& r) { hooked.push_back(r); }});
    const auto b = train::train(data, cfg);
    CHECK(encode_checkpoint(a.ckpt) == encode_checkpoint(b.ckpt));
    CHECK(a.ckpt.step == 12);
    CHECK(a.loss_history.size() == 12);
    CHECK(hooked.size() == a.log.size());
    CHECK(a.log.back().step == 12);
    CHECK(std::isfinite(a.final_test_psnr));
    cfg.train.seed = 4;
    CHECK(encode_checkpoint(train::train(data, cfg).ckpt) != encode_checkpoint(a.ckpt));
  }
  SUBCASE("loss decreases") {
    cfg.train.steps = 400;
    cfg.train.lr_start = 3e-3;
    cfg.train.lr_end = 3e-4;
    const auto r = train::train(data, cfg);
    const auto& h = r.loss_history;
    const std::vector<double> head(h.begin(), h.begin() + 100), tail(h.end() - 100, h.end());
    CHECK(median(head) > median(tail));
  }
  SUBCASE("metrics csv") {
    cfg.train.steps = 5;
    cfg.train.test_every = 5;
    const auto r = train::train(data, cfg);
    const fs::path p = fs::temp_directory_path() / "minerf_metrics_test.csv";
    write_metrics_csv(r.log, p);
    std::ifstream f(p);
    std::string header;
    std::getline(f, header);
    CHECK(header == "step,loss_c,loss_l,loss_i,lr,test_psnr");
    std::string row;
    std::getline(f, row);
    CHECK(row.rfind("5,", 0) == 0);
    fs::remove(p);
  }
  SUBCASE("empty dataset") {
    scene::Dataset empty;
    CHECK_THROWS_AS(train::train(empty, cfg), UsageError);
  }
}

TEST_CASE("personalization") {
  RunConfig cfg = testsupport::tiny_config();
  cfg.scene.n_identities = 3;
  scene::Dataset data = scene::make_dataset(cfg.scene);
  const scene::IdentityData third = data.identities[2];
  data.identities.pop_back();
  cfg.train.steps = 30;
  const Checkpoint base = train::train(data, cfg).ckpt;

  SUBCASE("zero steps leave the checkpoint unchanged") {
    const auto r = personalize(base, data.identities[0], {0, 1e-5});
    CHECK(encode_checkpoint(r.ckpt) == encode_checkpoint(base));
    CHECK_FALSE(r.unseen);
    CHECK(r.psnr_before == r.psnr_after);
  }
  SUBCASE("seen identity: module frozen, other codes untouched") {
    const auto r = personalize(base, data.identities[1], {5, 1e-4});
    CHECK_FALSE(r.unseen);
    CHECK(r.identity == 1);
    CHECK(same_values(base.model.params, r.ckpt.model.params, "cond."));
    CHECK(same_values(base.model.params, r.ckpt.model.params, "id/0"));
    CHECK(same_values(base.model.params, r.ckpt.model.params, "latent/0/"));
    CHECK_FALSE(same_values(base.model.params, r.ckpt.model.params, "fine."));
    CHECK_FALSE(same_values(base.model.params, r.ckpt.model.params, "id/1"));
  }
  SUBCASE("unseen identity gets a fresh code") {
    const auto r = personalize(base, third, {5, 1e-4});
    CHECK(r.unseen);
    CHECK(r.identity == 2);
    CHECK(r.ckpt.model.n_identities() == 3);
    CHECK(same_values(base.model.params, r.ckpt.model.params, "cond."));
    CHECK(same_values(base.model.params, r.ckpt.model.params, "id/0"));
    CHECK(same_values(base.model.params, r.ckpt.model.params, "id/1"));
    const auto again = personalize(base, third, {5, 1e-4});
    CHECK(encode_checkpoint(again.ckpt) == encode_checkpoint(r.ckpt));
  }
  SUBCASE("errors") {
    scene::IdentityData empty;
    empty.name = "x";
    CHECK_THROWS_AS(personalize(base, empty, {}), UsageError);
  }
}

TEST_CASE("checkpoint round trip") {
  RunConfig cfg = testsupport::tiny_config();
  const scene::Dataset data = scene::make_dataset(cfg.scene);
  cfg.train.steps = 3;
  const Checkpoint ck = train::train(data, cfg).ckpt;
  const auto bytes = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(back.step == 3);
  CHECK(back.model.identities.size() == ck.model.identities.size());
  REQUIRE(back.model.params.size() == ck.model.params.size());
  for (std::size_t k = 0; k < ck.model.params.size(); ++k) {
    const auto& a = ck.model.params.all()[k];
    const auto& b = back.model.params.all()[k];
    CHECK(a.name == b.name);
    CHECK(a.value == b.value);
    CHECK(a.adam_m == b.adam_m);
    CHECK(a.adam_v == b.adam_v);
    CHECK(a.adam_t == b.adam_t);
  }
  CHECK(to_json(back.config) == to_json(ck.config));
  CHECK(bytes[bytes.size() - 1] == bytes[bytes.size() - 1]);
  const std::string text(bytes.begin(), bytes.end());
  CHECK(text.find('\n') != std::string::npos);
  CHECK(nlohmann::json::parse(text.substr(0, text.find('\n')))["format"] == "minerf-checkpoint");

  const fs::path p = fs::temp_directory_path() / "minerf_ckpt_test.bin";
  save_checkpoint(ck, p);
  CHECK(encode_checkpoint(load_checkpoint(p)) == bytes);
  fs::remove(p);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 8);
  CHECK_THROWS(decode_checkpoint(truncated));
  CHECK_THROWS(decode_checkpoint(std::vector<std::uint8_t>{'{', '}', '\n'}));
}

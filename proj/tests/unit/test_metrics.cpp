// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "minerf/errors.hpp"
#include "minerf/metrics.hpp"
#include "minerf/trainer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace minerf;
using namespace minerf::metrics;
using testsupport::random_mat;
namespace fs = std::filesystem;

namespace {

Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("psnr examples") {
  Rng rng(80);
  const Image a = random_image(8, 6, rng);
  CHECK(psnr(a, a) == kInfinitePsnr);
  CHECK(format_psnr(psnr(a, a)) == "inf");
  CHECK(psnr(Image(4, 4, 0.0), Image(4, 4, 1.0)) == 0.0);
  CHECK(psnr(Image(4, 4, 0.0), Image(4, 4, 0.1)) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(Image(4, 4, 0.0), Image(4, 4, 0.2), 2.0) == doctest::Approx(20.0).epsilon(1e-12));
  for (int n = 0; n < 200; ++n) {
    const Image x = random_image(5, 4, rng), y = random_image(5, 4, rng);
    CHECK(psnr(x, y) == psnr(y, x));
  }
  CHECK_THROWS_AS(psnr(Image(4, 4), Image(4, 5)), DimensionError);
}

TEST_CASE("ssim examples") {
  Rng rng(81);
  const Image a = random_image(32, 32, rng), b = random_image(32, 32, rng);
  CHECK(ssim(a, a) == 1.0);
  const double c1 = 1e-4;
  const double ma = 0.3, mb = 0.7;
  CHECK(ssim(Image(10, 10, ma), Image(10, 10, mb)) ==
        doctest::Approx((2 * ma * mb + c1) / (ma * ma + mb * mb + c1)).epsilon(1e-12));
  CHECK(std::abs(ssim(a, b) - testsupport::loop_ssim(luma(a), luma(b), 8)) < 1e-12);
  for (int n = 0; n < 200; ++n) {
    const int w = 8 + static_cast<int>(rng.below(9)), h = 8 + static_cast<int>(rng.below(9));
    const Image x = random_image(w, h, rng);
    Image y = x;
    for (double& v : y.data()) v = std::clamp(v + rng.uniform(-0.5, 0.5), 0.0, 1.0);
    if (n % 3 == 0) for (double& v : y.data()) v = 1.0 - v;
    const double s = ssim(x, y);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(std::abs(s - testsupport::loop_ssim(luma(x), luma(y), 8)) < 1e-12);
  }
  CHECK_THROWS_AS(ssim(Image(7, 9), Image(7, 9)), UsageError);
  const Image px = [] {
    Image i(1, 1);
    i.set_pixel(0, 0, Vec3(1, 0, 0));
    return i;
  }();
  CHECK(luma(px)(0, 0) == 0.299);
}

TEST_CASE("singular value examples") {
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = -2;
  const Vec s = singular_values(d);
  CHECK(s[0] == doctest::Approx(3.0));
  CHECK(s[1] == doctest::Approx(2.0));

  Vec u(3), v(4);
  u << 2, 0, 0;
  v << 0, 3, 0, 0;
  Rng rng(82);
  const Mat Q = Eigen::HouseholderQR<Mat>(random_mat(3, 3, rng)).householderQ();
  const Vec uu = Q * u;
  const Mat r1 = uu * v.transpose();
  const Vec s1 = singular_values(r1);
  REQUIRE(s1.size() == 3);
  CHECK(s1[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(std::abs(s1[1]) < 1e-12);
  CHECK(std::abs(s1[2]) < 1e-12);

  CHECK(singular_values(Mat::Identity(5, 5)) == Vec::Ones(5));
  Mat bad = Mat::Zero(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(singular_values(bad), NumericError);
}

TEST_CASE("singular values against the eigenvalues of W^T W") {
  Rng rng(83);
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    const int r = 1 + static_cast<int>(rng.below(7)), c = 1 + static_cast<int>(rng.below(7));
    const Mat W = random_mat(r, c, rng);
    const Vec s = singular_values(W);
    REQUIRE(s.size() == std::min(r, c));
    const Mat G = r >= c ? Mat(W.transpose() * W) : Mat(W * W.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    Vec ev = es.eigenvalues().reverse();
    for (int k = 0; k < s.size(); ++k) worst = std::max(worst, std::abs(s[k] * s[k] - std::max(0.0, ev[k])));
    for (int k = 1; k < s.size(); ++k) CHECK(s[k] <= s[k - 1]);
    // Power iteration on the Gram matrix for the top value.
    Vec x = Vec::Ones(G.rows());
    for (int it = 0; it < 2000; ++it) x = (G * x).normalized();
    CHECK(std::abs(x.dot(G * x) - s[0] * s[0]) < 1e-6 * std::max(1.0, s[0] * s[0]));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("singular values are invariant under permutation and transpose") {
  Rng rng(84);
  for (int n = 0; n < 200; ++n) {
    const int r = 1 + static_cast<int>(rng.below(6)), c = 1 + static_cast<int>(rng.below(6));
    const Mat W = random_mat(r, c, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> pr(r), pc(c);
    pr.setIdentity();
    pc.setIdentity();
    for (int k = r - 1; k > 0; --k) std::swap(pr.indices()[k], pr.indices()[static_cast<int>(rng.below(k + 1))]);
    for (int k = c - 1; k > 0; --k) std::swap(pc.indices()[k], pc.indices()[static_cast<int>(rng.below(k + 1))]);
    const Vec s = singular_values(W);
    CHECK(testsupport::max_abs(singular_values(pr * W * pc) - s) < 1e-10);
    CHECK(testsupport::max_abs(singular_values(W.transpose()) - s) < 1e-10);
  }
}

TEST_CASE("evaluation on a small trained model") {
  RunConfig cfg = testsupport::tiny_config();
  const scene::Dataset data = scene::make_dataset(cfg.scene);
  cfg.train.steps = 20;
  const Checkpoint ck = train::train(data, cfg).ckpt;
  const EvalReport rep = evaluate(ck, data, true);
  CHECK(rep.variant == "M");
  CHECK(rep.frames.size() == 2);
  CHECK(rep.identities.size() == 2);
  REQUIRE(rep.transfer.size() == 2);
  CHECK(std::abs(rep.mean_psnr - test_psnr(ck, data)) < 1e-12);
  for (std::size_t j = 0; j < 2; ++j) {
    // Degenerate transfer equals the ordinary held-out score.
    CHECK(std::abs(rep.transfer[j][j] - rep.frames[j].psnr) < 1e-12);
    CHECK(rep.frames[j].ssim <= 1.0);
  }
  CHECK_THROWS_AS(transfer_eval(ck, data, "nobody", rep.identities[0]), UsageError);

  const fs::path dir = fs::temp_directory_path() / "minerf_eval_test";
  fs::remove_all(dir);
  write_report(rep, dir);
  CHECK(fs::exists(dir / "frames.csv"));
  CHECK(fs::exists(dir / "transfer.csv"));
  std::ifstream sj(dir / "summary.json");
  const auto j = nlohmann::json::parse(sj);
  CHECK(j["variant"] == "M");
  CHECK(j["transfer"].size() == 2);
  write_singular_values_csv(singular_values(Mat::Identity(3, 3)), dir / "sv.csv");
  std::ifstream sv(dir / "sv.csv");
  std::string line;
  std::getline(sv, line);
  CHECK(line == "index,singular_value");
  std::getline(sv, line);
  CHECK(line == "0,1");
  fs::remove_all(dir);

  EvalReport inf_rep;
  inf_rep.mean_psnr = kInfinitePsnr;
  CHECK(to_json(inf_rep)["mean_psnr"] == "inf");
}

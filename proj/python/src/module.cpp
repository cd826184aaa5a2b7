// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings: the closed-form conditioning maps, compositing, image
// metrics, and the dataset / train / evaluate pipeline.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "minerf/checkpoint.hpp"
#include "minerf/conditioning.hpp"
#include "minerf/config.hpp"
#include "minerf/errors.hpp"
#include "minerf/metrics.hpp"
#include "minerf/renderer.hpp"
#include "minerf/runtime.hpp"
#include "minerf/synthscene.hpp"
#include "minerf/trainer.hpp"
#include "minerf/verify.hpp"

namespace py = pybind11;
using namespace minerf;

namespace {

using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// H x W x 3 float array to Image.
Image to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DimensionError("expected an H x W x 3 array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

RunConfig parse_config(const std::string& json_text) {
  return json_text.empty() ? RunConfig{} : config_from_json(nlohmann::json::parse(json_text));
}

}  // namespace

PYBIND11_MODULE(_minerf, m) {
  m.doc() = "Multiplicative identity-expression conditioning for neural radiance fields";
  tune_allocator();

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "m_forward",
      [](const Mat& U1, const Mat& U2, const Mat& C, const Mat& W2, const Mat& W3, const Vec& e, const Vec& i) {
        return cond::m_forward(cond::MParams{U1, U2, C, W2, W3}, e, i);
      },
      py::arg("U1"), py::arg("U2"), py::arg("C"), py::arg("W2"), py::arg("W3"), py::arg("e"), py::arg("i"),
      "C ((U1 e) * (U2 i)) + W2 e + W3 i");
  m.def(
      "h_forward",
      [](const std::vector<Mat>& U_e, const std::vector<Mat>& U_i, const Mat& C, const Vec& e, const Vec& i,
         bool multiplicative_only) {
        cond::HParams p{U_e, U_i, C};
        return cond::h_forward(p, e, i, multiplicative_only ? cond::HMode::MultiplicativeOnly : cond::HMode::Full);
      },
      py::arg("U_e"), py::arg("U_i"), py::arg("C"), py::arg("e"), py::arg("i"),
      py::arg("multiplicative_only") = false, "Higher-order interaction of degree len(U_e)");
  m.def("variants", [] {
    std::vector<std::string> out;
    for (auto v : cond::all_variants()) out.emplace_back(cond::to_string(v));
    return out;
  });

  m.def(
      "composite",
      [](const std::vector<double>& t, const std::vector<double>& sigma, const RowArray& rgb, double t_far,
         const Vec3& background) {
        if (rgb.cols() != 3 || rgb.rows() != static_cast<Eigen::Index>(t.size())) {
          throw DimensionError("composite: rgb must be len(t) x 3");
        }
        render::SampleSet s;
        s.t = t;
        s.sigma = sigma;
        s.t_far = t_far;
        for (Eigen::Index k = 0; k < rgb.rows(); ++k) s.rgb.emplace_back(rgb(k, 0), rgb(k, 1), rgb(k, 2));
        const auto r = render::composite(s, background);
        py::dict out;
        out["color"] = r.color;
        out["weights"] = r.weights;
        out["transmittance"] = r.transmittance;
        out["t_end"] = r.t_end;
        out["depth"] = r.depth;
        return out;
      },
      py::arg("t"), py::arg("sigma"), py::arg("rgb"), py::arg("t_far"), py::arg("background"),
      "Quadrature of the volume rendering integral along one ray");

  m.def(
      "psnr", [](py::array_t<double> a, py::array_t<double> b, double max_val) {
        return metrics::psnr(to_image(a), to_image(b), max_val);
      },
      py::arg("a"), py::arg("b"), py::arg("max_val") = 1.0);
  m.def(
      "ssim", [](py::array_t<double> a, py::array_t<double> b, int window) {
        return metrics::ssim(to_image(a), to_image(b), window);
      },
      py::arg("a"), py::arg("b"), py::arg("window") = 8);
  m.def("singular_values", [](const Mat& W) { return metrics::singular_values(W); }, py::arg("W"));

  m.def("default_config", [] { return to_json(RunConfig{}).dump(2); }, "Fully materialized default config (JSON)");
  m.def(
      "generate_dataset",
      [](const std::string& config_json, const std::filesystem::path& out, int threads) {
        const RunConfig cfg = parse_config(config_json);
        py::gil_scoped_release release;
        return scene::save_dataset(scene::make_dataset(cfg.scene, true, threads), out);
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("threads") = 1, "Writes the dataset; returns its checksum");
  m.def(
      "train",
      [](const std::string& config_json, const std::filesystem::path& data_dir, const std::filesystem::path& out) {
        const RunConfig cfg = parse_config(config_json);
        train::TrainResult r;
        {
          py::gil_scoped_release release;
          r = train::train(scene::load_dataset(data_dir), cfg);
        }
        std::filesystem::create_directories(out);
        save_checkpoint(r.ckpt, out / "checkpoint.bin");
        train::write_metrics_csv(r.log, out / "metrics.csv");
        py::dict res;
        res["loss_history"] = r.loss_history;
        res["final_test_psnr"] = r.final_test_psnr;
        res["checkpoint"] = (out / "checkpoint.bin").string();
        return res;
      },
      py::arg("config_json"), py::arg("data_dir"), py::arg("out_dir"),
      "Trains from scratch and writes checkpoint.bin and metrics.csv");
  m.def(
      "evaluate",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& data_dir, bool transfer) {
        std::string text;
        {
          py::gil_scoped_release release;
          const Checkpoint c = load_checkpoint(ckpt);
          text = metrics::to_json(metrics::evaluate(c, scene::load_dataset(data_dir), transfer)).dump();
        }
        return py::module_::import("json").attr("loads")(text);
      },
      py::arg("checkpoint"), py::arg("data_dir"), py::arg("transfer") = true, "Evaluation report as a dict");
  m.def(
      "verify",
      [](const std::string& suite) {
        return py::module_::import("json").attr("loads")(verify::to_json(verify::run_suite(suite)).dump());
      },
      py::arg("suite"), "Runs a self-check suite; returns its report");
}

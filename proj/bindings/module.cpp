#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "cmit/cloud.hpp"
#include "cmit/data.hpp"
#include "cmit/error.hpp"
#include "cmit/nn.hpp"
#include "cmit/pipeline.hpp"
#include "cmit/pso.hpp"
#include "cmit/rng.hpp"
#include "cmit/stats.hpp"
#include "cmit/tensor.hpp"
#include "cmit/version.hpp"

namespace py = pybind11;
using namespace cmit;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(double));
  return out;
}

py::array_t<double> array_from_vector(const std::vector<double>& v) {
  py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

EvalTable table_from_args(const std::vector<std::string>& dataset_ids,
                          const std::vector<std::string>& model_names,
                          const py::array_t<double, py::array::c_style | py::array::forcecast>& m) {
  if (m.ndim() != 2) throw ArgumentError("mape matrix must be 2-D");
  EvalTable t;
  t.dataset_ids = dataset_ids;
  t.model_names = model_names;
  for (py::ssize_t i = 0; i < m.shape(0); ++i) {
    t.values.emplace_back(m.data() + i * m.shape(1), m.data() + (i + 1) * m.shape(1));
  }
  t.validate();
  return t;
}

}  // namespace

PYBIND11_MODULE(_cmit, m) {
  m.doc() = "Cloud-membership-normalized transformer load forecasting toolkit";
  m.attr("__version__") = kVersion;

  py::register_exception<ArgumentError>(m, "CmitArgumentError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "CmitConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "CmitParseError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "CmitNumericError", PyExc_ArithmeticError);

  // ---- cloud model ----
  m.def("membership", &membership, py::arg("x"), py::arg("ex"), py::arg("en_prime"),
        "Certainty degree exp(-(x-ex)^2 / (2 en_prime^2)).");
  m.def(
      "forward_generate",
      [](double ex, double en, double he, std::size_t n, std::uint64_t seed) {
        const auto drops = forward_generate({ex, en, he}, n, seed);
        std::vector<double> xs(n), us(n), ens(n);
        for (std::size_t i = 0; i < n; ++i) {
          xs[i] = drops[i].x;
          us[i] = drops[i].u;
          ens[i] = drops[i].en_prime;
        }
        return py::dict(py::arg("x") = array_from_vector(xs),
                        py::arg("u") = array_from_vector(us),
                        py::arg("en_prime") = array_from_vector(ens));
      },
      py::arg("ex"), py::arg("en"), py::arg("he"), py::arg("n"), py::arg("seed"),
      "Draw n cloud drops; returns dict of arrays x, u, en_prime.");
  m.def(
      "reverse_generate",
      [](const std::vector<double>& samples, const std::string& variance_mode) {
        const auto mode = variance_mode == "sample" ? VarianceMode::sample
                                                    : VarianceMode::population;
        const auto d = reverse_generate(samples, mode);
        return py::make_tuple(d.ex, d.en, d.he);
      },
      py::arg("samples"), py::arg("variance_mode") = "population",
      "Estimate (ex, en, he) from samples.");

  // ---- normalization layers ----
  m.def(
      "layer_norm",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        Tensor t = tensor_from_array(x);
        LayerNorm ln(t.shape().back(), /*affine=*/false);
        return array_from_tensor(ln.forward(t));
      },
      py::arg("x"), "Standard layer normalization over the last axis (no affine).");
  m.def(
      "cloud_norm",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         bool stochastic, std::uint64_t seed, double noise_divisor) {
        Tensor t = tensor_from_array(x);
        CloudNormConfig cfg;
        cfg.noise_divisor = noise_divisor;
        CloudNorm cn(t.shape().back(), cfg);
        Rng rng(seed);
        return array_from_tensor(cn.forward(t, &rng, stochastic));
      },
      py::arg("x"), py::arg("stochastic") = false, py::arg("seed") = 0,
      py::arg("noise_divisor") = 100.0,
      "Membership normalization over the last axis; outputs in (0, 1].");

  // ---- ensemble / swarm ----
  m.def(
      "pso_fit",
      [](const std::vector<double>& first, const std::vector<double>& second,
         const std::vector<double>& truths, std::size_t particles, std::size_t iterations,
         double omega, double c1, double c2, const std::string& r_distribution,
         const std::string& position_update, std::uint64_t seed) {
        SwarmConfig cfg;
        cfg.particles = particles;
        cfg.iterations = iterations;
        cfg.omega = omega;
        cfg.c1 = c1;
        cfg.c2 = c2;
        cfg.r_distribution = r_distribution == "uniform01"
                                 ? RandomCoefficients::uniform01
                                 : RandomCoefficients::standard_normal;
        cfg.position_update = position_update == "standard" ? PositionUpdate::standard
                                                            : PositionUpdate::paper;
        cfg.seed = seed;
        const auto fit = pso_fit(build_ensemble_set(first, second, truths), cfg);
        return py::dict(py::arg("w") = fit.w, py::arg("objective") = fit.objective,
                        py::arg("trace") = fit.trace);
      },
      py::arg("first_preds"), py::arg("second_preds"), py::arg("truths"),
      py::arg("particles") = 30, py::arg("iterations") = 100, py::arg("omega") = 0.7,
      py::arg("c1") = 1.5, py::arg("c2") = 1.5, py::arg("r_distribution") = "standard_normal",
      py::arg("position_update") = "paper", py::arg("seed") = 0,
      "Simplex-constrained swarm fit of two-model combination weights.");
  m.def(
      "ensemble_objective",
      [](const std::vector<double>& first, const std::vector<double>& second,
         const std::vector<double>& truths, const std::vector<double>& w) {
        return ensemble_objective(build_ensemble_set(first, second, truths), w);
      },
      py::arg("first_preds"), py::arg("second_preds"), py::arg("truths"), py::arg("w"));
  m.def(
      "combine",
      [](const std::vector<double>& preds, const std::vector<double>& w) {
        return combine(preds, w);
      },
      py::arg("preds"), py::arg("w"), "Weighted fusion of per-model predictions.");

  // ---- statistics ----
  m.def("mape", &mape, py::arg("truth"), py::arg("pred"),
        "Mean absolute percentage error, percent.");
  m.def(
      "wilcoxon_signed_rank",
      [](const std::vector<double>& x, const std::vector<double>& y,
         const std::string& zero_policy) {
        const auto r = wilcoxon_signed_rank(
            x, y, zero_policy == "pratt" ? ZeroPolicy::pratt : ZeroPolicy::drop);
        return py::dict(py::arg("r_plus") = r.r_plus, py::arg("r_minus") = r.r_minus,
                        py::arg("n_effective") = r.n_effective, py::arg("z") = r.z,
                        py::arg("p_one_sided") = r.p_one_sided);
      },
      py::arg("x"), py::arg("y"), py::arg("zero_policy") = "drop");
  m.def(
      "friedman",
      [](const std::vector<std::string>& dataset_ids,
         const std::vector<std::string>& model_names,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& mape_matrix) {
        const auto r = friedman(table_from_args(dataset_ids, model_names, mape_matrix));
        return py::dict(py::arg("avg_ranks") = r.avg_ranks,
                        py::arg("statistic") = r.statistic, py::arg("p_value") = r.p_value);
      },
      py::arg("dataset_ids"), py::arg("model_names"), py::arg("mape_matrix"));
  m.def(
      "win_loss",
      [](const std::vector<std::string>& dataset_ids,
         const std::vector<std::string>& model_names,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& mape_matrix) {
        const auto r = win_loss(table_from_args(dataset_ids, model_names, mape_matrix));
        return py::dict(py::arg("wins") = r.wins, py::arg("losses") = r.losses);
      },
      py::arg("dataset_ids"), py::arg("model_names"), py::arg("mape_matrix"));

  // ---- data ----
  m.def(
      "generate_synthetic",
      [](std::size_t cluster, std::size_t days, std::uint64_t seed) {
        const auto profile = default_profile(cluster, seed);
        const auto ds = generate_synthetic(profile, days, mix_seed(seed, 0xD5ULL + cluster));
        std::vector<std::string> dates(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) dates[i] = format_date(ds.date_at(i));
        return py::make_tuple(dates, ds.loads);
      },
      py::arg("cluster") = 0, py::arg("days") = 789, py::arg("seed") = 7,
      "One synthetic daily-load series; returns (iso_dates, loads).");

  // ---- pipeline ----
  m.def(
      "run_pipeline",
      [](const std::string& config_json) {
        const auto result = run_pipeline(run_config_from_json_string(config_json));
        py::list rows;
        for (const auto& row : result.table.values) rows.append(row);
        return py::dict(py::arg("dataset_ids") = result.table.dataset_ids,
                        py::arg("model_names") = result.table.model_names,
                        py::arg("mape") = rows, py::arg("failures") = result.failures,
                        py::arg("eval_table_path") = result.eval_table_path.string());
      },
      py::arg("config_json"), "Execute a full sweep from a JSON config string.");
}

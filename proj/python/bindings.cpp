// Python bindings. Results are returned as plain dicts of floats and numpy
// arrays; ModelParams and ObservedSeries are exposed as classes.

#include "pcm/em.hpp"
#include "pcm/io.hpp"
#include "pcm/pricing.hpp"
#include "pcm/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pcm;

namespace {

Measure measure_from(const std::string& name) {
  if (name == "real") return Measure::Real;
  if (name == "risk-neutral") return Measure::RiskNeutral;
  throw DomainError("measure must be 'real' or 'risk-neutral'");
}

py::dict trace_dict(const EmTrace& t) {
  std::vector<double> loglik, lambda_old, lambda_new;
  for (const auto& it : t.iterations) {
    loglik.push_back(it.loglik);
    lambda_old.push_back(it.lambda_old);
    lambda_new.push_back(it.lambda_new);
  }
  py::dict d;
  d["termination"] = t.termination;
  d["diagnostic"] = t.diagnostic;
  d["loglik"] = loglik;
  d["lambda_old"] = lambda_old;
  d["lambda_new"] = lambda_new;
  d["final_loglik"] = t.final_loglik;
  d["warnings"] = t.warnings;
  return d;
}

py::dict info_set(const InfoSetResult& r) {
  py::dict d;
  d["log_asset_mean"] = r.moments.mean;
  d["log_asset_var"] = r.moments.var;
  d["call"] = r.prices.call;
  d["put"] = r.prices.put;
  d["equity"] = r.values.equity;
  d["debt"] = r.values.debt;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Private company valuation model";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<NumericalError>(m, "NumericalError", base);
  py::register_exception<NoSolutionError>(m, "NoSolutionError", base);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("k_tilde", &ModelParams::k_tilde)
      .def_readwrite("mu0", &ModelParams::mu0)
      .def_readwrite("Sigma0", &ModelParams::Sigma0)
      .def_readwrite("phi", &ModelParams::phi)
      .def_readwrite("Sigma_u", &ModelParams::Sigma_u)
      .def_readwrite("Sigma_v", &ModelParams::Sigma_v)
      .def_readwrite("r_tilde", &ModelParams::r_tilde)
      .def("validate", &ModelParams::validate)
      .def("__repr__", [](const ModelParams& p) {
        return "ModelParams(k_tilde=[" + std::to_string(p.k_tilde[0]) + ", " + std::to_string(p.k_tilde[1]) +
               "], r_tilde=" + std::to_string(p.r_tilde) + ")";
      });

  py::class_<ObservedSeries>(m, "ObservedSeries")
      .def(py::init<>())
      .def_readwrite("B0", &ObservedSeries::B0)
      .def_readwrite("b_tilde", &ObservedSeries::b_tilde)
      .def_readwrite("varrho_tilde", &ObservedSeries::varrho_tilde)
      .def_property_readonly("T", &ObservedSeries::T)
      .def("books", &ObservedSeries::books)
      .def("validate", &ObservedSeries::validate);

  m.def("derive_series", [](const std::vector<Vec2>& books, const std::vector<Vec2>& payouts) {
    return derive_series(books, payouts);
  }, py::arg("books"), py::arg("payouts"), "Series from raw books B_0..B_T and payouts p_1..p_T.");

  m.def("read_csv", [](const std::string& path) {
    const auto p = read_panel_csv(path);
    py::dict d;
    d["first_period"] = p.first_period;
    d["books"] = p.books;
    d["payouts"] = p.payouts;
    return d;
  }, py::arg("path"));

  m.def("ingest_csv", &ingest_csv, py::arg("path"));

  m.def("default_initial_params", &default_initial_params, py::arg("series"), py::arg("r_tilde"));

  m.def("em_fit", [](const ObservedSeries& series, const ModelParams& init, int max_iter, double tol) {
    EmOptions opt;
    opt.max_iter = max_iter;
    opt.tol = tol;
    const auto fit = em_fit(series, init, opt);
    return py::make_tuple(fit.params, trace_dict(fit.trace));
  }, py::arg("series"), py::arg("init"), py::arg("max_iter") = 500, py::arg("tol") = 1e-8,
        "Returns (params, trace).");

  m.def("filter", [](const ModelParams& p, const ObservedSeries& series, const std::string& measure) {
    const auto sched = build_linearization_schedule(p, series.varrho_tilde);
    const auto f = run_filter(p, sched, series, measure_from(measure));
    std::vector<Vec2> mean;
    std::vector<Mat2> cov;
    for (int t = 0; t <= f.T(); ++t) {
      mean.push_back(f.multiplier(t));
      cov.push_back(f.multiplier_cov(t));
    }
    py::dict d;
    d["m"] = mean;
    d["m_cov"] = cov;
    d["loglik"] = f.loglik;
    return d;
  }, py::arg("params"), py::arg("series"), py::arg("measure") = "real");

  m.def("smooth", [](const ModelParams& p, const ObservedSeries& series) {
    const auto stats = e_step(p, series);
    py::dict d;
    d["m"] = stats.post.mean;
    d["m_cov"] = stats.post.var;
    d["market_value"] = smoothed_market_values(stats, series);
    return d;
  }, py::arg("params"), py::arg("series"));

  m.def("price", [](const ModelParams& p, const ObservedSeries& series, const std::vector<Vec2>& future_varrho,
                    int tau, double L, std::optional<Vec2> public_multiplier) {
    const auto ctx = prepare_pricing(p, series, future_varrho, tau);
    const Vec2 mt = public_multiplier.value_or(ctx.filter_rn.multiplier(ctx.t()));
    py::dict d;
    d["private"] = info_set(price_private(ctx, L));
    d["public"] = info_set(price_public(ctx, L, mt));
    return d;
  }, py::arg("params"), py::arg("series"), py::arg("future_varrho"), py::arg("maturity"), py::arg("strike"),
        py::arg("public_multiplier") = py::none());

  m.def("default_probability", [](const ModelParams& p, const ObservedSeries& series,
                                  const std::vector<Vec2>& future_varrho, int tau, double L_bar,
                                  std::optional<Vec2> public_multiplier) {
    const auto ctx = prepare_pricing(p, series, future_varrho, tau);
    const Vec2 mt = public_multiplier.value_or(ctx.filter_real.multiplier(ctx.t()));
    py::dict d;
    d["private"] = default_probability_private(ctx, L_bar);
    d["public"] = default_probability_public(ctx, L_bar, mt);
    return d;
  }, py::arg("params"), py::arg("series"), py::arg("future_varrho"), py::arg("maturity"), py::arg("threshold"),
        py::arg("public_multiplier") = py::none());

  m.def("calibrate_threshold", [](const ModelParams& p, const ObservedSeries& series,
                                  const std::vector<Vec2>& future_varrho, int tau) {
    const auto ctx = prepare_pricing(p, series, future_varrho, tau);
    py::dict d;
    d["equity_target"] = equity_value_target(ctx);
    d["threshold"] = calibrate_default_threshold(ctx);
    return d;
  }, py::arg("params"), py::arg("series"), py::arg("future_varrho"), py::arg("maturity"));

  m.def("simulate_company", [](const ModelParams& p, const std::vector<Vec2>& varrho, const Vec2& B0, int T,
                               std::uint64_t seed) {
    const auto c = simulate_company(p, varrho, B0, T, seed);
    py::dict d;
    d["books"] = c.books;
    d["payouts"] = c.payouts;
    d["m"] = c.m;
    return d;
  }, py::arg("params"), py::arg("varrho"), py::arg("B0"), py::arg("T"), py::arg("seed"));
}

// pcm: batch interface to the private company valuation model.
//
// Exit status: 0 success, 2 invalid input or configuration, 3 numerical
// failure (infeasible linearization, singular matrices, aborted EM),
// 4 no solution (threshold calibration), 1 anything else.

#include "pcm/em.hpp"
#include "pcm/io.hpp"
#include "pcm/pricing.hpp"
#include "pcm/simulation.hpp"
#include "run_config.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

using namespace pcm;
using namespace pcm::cli;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNoSolution = 4;

struct Data {
  BookPanel panel;
  ObservedSeries series;
};

Data load_data(const RunConfig& cfg) {
  if (!cfg.input) throw DomainError("an input CSV is required (--input)");
  Data d;
  d.panel = read_panel_csv(*cfg.input);
  d.series = derive_series(d.panel.books, d.panel.payouts);
  return d;
}

int require_maturity(const RunConfig& cfg) {
  if (!cfg.maturity) throw DomainError("a maturity is required (--maturity)");
  return *cfg.maturity;
}

std::vector<Vec2> future_schedule(const RunConfig& cfg, int tau) {
  if (cfg.future_varrho) {
    if (cfg.future_varrho->size() < static_cast<std::size_t>(tau))
      throw DomainError("future_varrho covers " + std::to_string(cfg.future_varrho->size()) +
                        " periods but the maturity is " + std::to_string(tau));
    return {cfg.future_varrho->begin(), cfg.future_varrho->begin() + tau};
  }
  if (cfg.future_payout_ratio)
    return std::vector<Vec2>(static_cast<std::size_t>(tau),
                             cfg.future_payout_ratio->array().log().matrix());
  throw DomainError(
      "payout ratios after the last observation are required: set future_varrho or "
      "future_payout_ratio in the config");
}

Json feasibility(const LinearizationSchedule& s) {
  const double x = s.max_exp_varphi();
  return {{"max_exp_varphi", x}, {"feasible", x < 1.0}};
}

Json em_report(const EmResult& fit) {
  Json iters = Json::array();
  bool nondecreasing = true;
  for (std::size_t i = 0; i < fit.trace.iterations.size(); ++i) {
    const auto& it = fit.trace.iterations[i];
    iters.push_back({{"iteration", i + 1},
                     {"loglik", it.loglik},
                     {"lambda_old", it.lambda_old},
                     {"lambda_new", it.lambda_new},
                     {"max_change", it.max_change}});
    if (i > 0) nondecreasing = nondecreasing && it.loglik >= fit.trace.iterations[i - 1].loglik;
  }
  if (!fit.trace.iterations.empty())
    nondecreasing = nondecreasing && fit.trace.final_loglik >= fit.trace.iterations.back().loglik;
  Json j;
  j["termination"] = fit.trace.termination;
  if (!fit.trace.diagnostic.empty()) j["diagnostic"] = fit.trace.diagnostic;
  j["iterations"] = iters.size();
  j["final_loglik"] = fit.trace.final_loglik;
  j["loglik_nondecreasing"] = nondecreasing;
  j["warnings"] = fit.trace.warnings;
  j["trace"] = iters;
  return j;
}

EmResult estimate(const RunConfig& cfg, const ObservedSeries& series, const ModelParams& init) {
  EmOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.tol = cfg.tol;
  return em_fit(series, init, opt);
}

ModelParams initial_params(const RunConfig& cfg, const ObservedSeries& series) {
  if (cfg.params_file || cfg.inline_params) {
    ModelParams p = cfg.params_file ? read_params_file(*cfg.params_file) : *cfg.inline_params;
    if (cfg.rate_given) p.r_tilde = cfg.r_tilde();
    return p;
  }
  return default_initial_params(series, cfg.r_tilde());
}

// Supplied parameters, or an in-run fit recorded under "estimate".
ModelParams resolve_params(const RunConfig& cfg, const ObservedSeries& series, Json& report) {
  const ModelParams init = initial_params(cfg, series);
  if (cfg.params_file || cfg.inline_params) {
    report["params_source"] = cfg.params_file ? "file" : "config";
    return init;
  }
  const auto fit = estimate(cfg, series, init);
  if (fit.trace.termination == "aborted")
    throw NumericalError("in-run estimation aborted: " + fit.trace.diagnostic);
  report["params_source"] = "estimated";
  report["estimate"] = em_report(fit);
  return fit.params;
}

Json header(const char* command, const RunConfig& cfg, const Data* d) {
  Json j;
  j["command"] = command;
  j["config"] = to_json(cfg);
  if (d) j["data"] = {{"first_period", d->panel.first_period}, {"T", d->series.T()}};
  return j;
}

Json smoothed_periods(const ModelParams& p, const Data& d) {
  const auto stats = e_step(p, d.series);
  const auto values = smoothed_market_values(stats, d.series);
  Json rows = Json::array();
  for (int t = 0; t <= d.series.T(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    Json r{{"period", d.panel.first_period + t},
           {"m", to_json(stats.post.mean[i])},
           {"m_cov", to_json(stats.post.var[i])},
           {"market_value", to_json(values[i])}};
    if (t > 0) r["m_lag_cov"] = to_json(stats.post.lag[i - 1]);
    rows.push_back(r);
  }
  return rows;
}

int cmd_estimate(const RunConfig& cfg, Json& report) {
  const auto d = load_data(cfg);
  report = header("estimate", cfg, &d);
  const ModelParams init = initial_params(cfg, d.series);
  const auto fit = estimate(cfg, d.series, init);
  report["init"] = to_json(init);
  report["params"] = to_json(fit.params);
  report["em"] = em_report(fit);
  if (fit.trace.termination == "aborted") return kExitNumerical;
  report["feasibility"] = feasibility(build_linearization_schedule(fit.params, d.series.varrho_tilde));
  report["smoothed"] = smoothed_periods(fit.params, d);
  return 0;
}

int cmd_filter(const RunConfig& cfg, Json& report) {
  const auto d = load_data(cfg);
  report = header("filter", cfg, &d);
  const auto p = resolve_params(cfg, d.series, report);
  const auto sched = build_linearization_schedule(p, d.series.varrho_tilde);
  const auto f = run_filter(p, sched, d.series, Measure::Real);
  report["params"] = to_json(p);
  report["feasibility"] = feasibility(sched);
  report["loglik"] = f.loglik;
  Json rows = Json::array();
  for (int t = 0; t <= f.T(); ++t) {
    Json r{{"period", d.panel.first_period + t},
           {"m", to_json(f.multiplier(t))},
           {"m_cov", to_json(f.multiplier_cov(t))}};
    if (t > 0) {
      const auto& s = f.steps[static_cast<std::size_t>(t - 1)];
      r["b_pred"] = to_json(s.pred.b);
      r["b_pred_cov"] = to_json(s.pred.S);
      r["loglik"] = s.loglik;
    }
    rows.push_back(r);
  }
  report["filtered"] = rows;
  return 0;
}

int cmd_smooth(const RunConfig& cfg, Json& report) {
  const auto d = load_data(cfg);
  report = header("smooth", cfg, &d);
  const auto p = resolve_params(cfg, d.series, report);
  report["params"] = to_json(p);
  report["feasibility"] = feasibility(build_linearization_schedule(p, d.series.varrho_tilde));
  report["smoothed"] = smoothed_periods(p, d);
  return 0;
}

int cmd_forecast(const RunConfig& cfg, Json& report) {
  const auto d = load_data(cfg);
  report = header("forecast", cfg, &d);
  const int tau = require_maturity(cfg);
  const auto p = resolve_params(cfg, d.series, report);
  auto varrho = d.series.varrho_tilde;
  const auto future = future_schedule(cfg, tau);
  varrho.insert(varrho.end(), future.begin(), future.end());
  const auto sched = build_linearization_schedule(p, varrho);
  const auto c = intercepts(p, sched, Measure::Real);
  const auto f = run_filter(p, sched, d.series.b_tilde, c);
  const auto fc = forecast(f, p, sched, c, sched.horizon());
  const auto lb = forecast_log_books(d.series, fc);
  report["params"] = to_json(p);
  report["feasibility"] = feasibility(sched);
  Json rows = Json::array();
  for (const auto& s : fc) {
    rows.push_back({{"period", d.panel.first_period + s.t},
                    {"m", to_json(Vec2(s.z.head<2>()))},
                    {"m_cov", to_json(Mat2(s.P.topLeftCorner<2, 2>()))},
                    {"b", to_json(s.b)},
                    {"b_cov", to_json(s.S)},
                    {"log_book", to_json(lb[static_cast<std::size_t>(s.t)])}});
  }
  report["forecast"] = rows;
  return 0;
}

// Public information set: the configured multiplier, else the filtered
// estimate at the last observation under the command's measure, so that the
// two information sets differ only in the multiplier uncertainty.
Vec2 public_multiplier(const RunConfig& cfg, const FilterOutput& filter, int t, Json& report) {
  report["public_multiplier_source"] = cfg.public_multiplier ? "config" : "filtered";
  return cfg.public_multiplier.value_or(filter.multiplier(t));
}

PricingContext pricing_context(const RunConfig& cfg, const Data& d, Json& report) {
  const int tau = require_maturity(cfg);
  const auto p = resolve_params(cfg, d.series, report);
  report["params"] = to_json(p);
  auto ctx = prepare_pricing(p, d.series, future_schedule(cfg, tau), tau);
  report["feasibility"] = feasibility(ctx.schedule);
  return ctx;
}

SimulatedPanel check_panel(const RunConfig& cfg, const PricingContext& ctx, const Vec2& m, const Mat2& P,
                           Measure measure, std::uint64_t stream) {
  PanelStart start;
  start.t0 = ctx.t();
  start.log_book = ctx.log_book_t();
  start.m_mean = m;
  start.m_cov = P;
  SimConfig sim;
  sim.n_paths = cfg.paths;
  sim.horizon = ctx.tau();
  sim.seed = SplitMix64(cfg.seed, stream)();  // one independent panel per check
  sim.measure = measure;
  sim.terminal_only = true;
  return simulate_panel(ctx.params, ctx.schedule, start, sim);
}

// Closed form against simulation. The z score uses the payoff standard
// deviation implied by the closed-form distribution.
Json mc_comparison(double closed, const McEstimate& mc, double null_sd) {
  const double se = null_sd / std::sqrt(static_cast<double>(mc.n));
  Json j{{"closed_form", closed},
         {"mc", mc.estimate},
         {"mc_std_error", mc.std_error},
         {"std_error", se},
         {"paths", mc.n}};
  if (se > 0.0) {
    const double z = std::abs(closed - mc.estimate) / se;
    j["z"] = z;
    j["within_3se"] = z <= 3.0;
  } else {
    j["z"] = nullptr;
    j["within_3se"] = closed == mc.estimate;
  }
  return j;
}

Json info_set(const InfoSetResult& r, const PricingContext& ctx) {
  return {{"log_asset_mean", r.moments.mean},
          {"log_asset_var", r.moments.var},
          {"discounted_asset_value",
           discounted_asset_value(r.moments.mean, r.moments.var, ctx.tau(), ctx.params.r_tilde)},
          {"call", r.prices.call},
          {"put", r.prices.put},
          {"equity", r.values.equity},
          {"debt", r.values.debt}};
}

int cmd_price(const RunConfig& cfg, Json& report) {
  const auto d = load_data(cfg);
  report = header("price", cfg, &d);
  if (!cfg.strike) throw DomainError("a strike is required (--strike)");
  const double L = *cfg.strike;
  const auto ctx = pricing_context(cfg, d, report);
  const Vec2 m = public_multiplier(cfg, ctx.filter_rn, ctx.t(), report);
  const auto priv = price_private(ctx, L);
  const auto pub = price_public(ctx, L, m);
  report["t"] = d.panel.first_period + ctx.t();
  report["maturity"] = ctx.tau();
  report["strike"] = L;
  report["private"] = info_set(priv, ctx);
  report["public"] = info_set(pub, ctx);
  if (cfg.check_mc) {
    Json check;
    const double r = ctx.params.r_tilde;
    const int t = ctx.t();
    auto run = [&](const InfoSetResult& res, const Vec2& m0, const Mat2& P0, std::uint64_t stream) {
      const auto panel = check_panel(cfg, ctx, m0, P0, Measure::RiskNeutral, stream);
      const auto sd = payoff_std_devs(res.moments.mean, res.moments.var, L, ctx.tau(), r);
      return Json{{"call", mc_comparison(res.prices.call, mc_option_price(panel, L, ctx.tau(), r, true), sd.call)},
                  {"put", mc_comparison(res.prices.put, mc_option_price(panel, L, ctx.tau(), r, false), sd.put)}};
    };
    check["private"] = run(priv, ctx.filter_rn.multiplier(t), ctx.filter_rn.multiplier_cov(t), 0);
    check["public"] = run(pub, m, Mat2::Zero(), 1);
    report["check_mc"] = check;
  }
  return 0;
}

Json pd_check(const RunConfig& cfg, const PricingContext& ctx, double pd, double L_bar, const Vec2& m,
              const Mat2& P, std::uint64_t stream) {
  const auto panel = check_panel(cfg, ctx, m, P, Measure::Real, stream);
  return mc_comparison(pd, mc_default_probability(panel, L_bar), std::sqrt(pd * (1.0 - pd)));
}

int cmd_default_prob(const RunConfig& cfg, Json& report) {
  const auto d = load_data(cfg);
  report = header("default-prob", cfg, &d);
  const auto ctx = pricing_context(cfg, d, report);
  const Vec2 m = public_multiplier(cfg, ctx.filter_real, ctx.t(), report);
  double L_bar;
  if (cfg.threshold) {
    L_bar = *cfg.threshold;
    report["threshold_source"] = "config";
  } else {
    L_bar = calibrate_default_threshold(ctx);
    report["threshold_source"] = "calibrated";
  }
  const double pd_priv = default_probability_private(ctx, L_bar);
  const double pd_pub = default_probability_public(ctx, L_bar, m);
  report["t"] = d.panel.first_period + ctx.t();
  report["maturity"] = ctx.tau();
  report["threshold"] = L_bar;
  const auto mom_priv = default_moments_private(ctx);
  const auto mom_pub = default_moments_public(ctx, m);
  report["private"] = {{"log_asset_mean", mom_priv.mean}, {"log_asset_var", mom_priv.var}, {"pd", pd_priv}};
  report["public"] = {{"log_asset_mean", mom_pub.mean}, {"log_asset_var", mom_pub.var}, {"pd", pd_pub}};
  if (cfg.check_mc) {
    const int t = ctx.t();
    report["check_mc"] = {
        {"private", pd_check(cfg, ctx, pd_priv, L_bar, ctx.filter_real.multiplier(t),
                             ctx.filter_real.multiplier_cov(t), 2)},
        {"public", pd_check(cfg, ctx, pd_pub, L_bar, m, Mat2::Zero(), 3)}};
  }
  return 0;
}

int cmd_calibrate(const RunConfig& cfg, Json& report) {
  const auto d = load_data(cfg);
  report = header("calibrate-threshold", cfg, &d);
  const auto ctx = pricing_context(cfg, d, report);
  const double target = equity_value_target(ctx);
  const double L_bar = calibrate_default_threshold(ctx);
  const auto priced = price_private(ctx, L_bar);
  report["t"] = d.panel.first_period + ctx.t();
  report["maturity"] = ctx.tau();
  report["equity_target"] = target;
  report["threshold"] = L_bar;
  report["repriced_equity"] = priced.prices.call;
  report["pd_private"] = default_probability_private(ctx, L_bar);
  return 0;
}

int cmd_simulate(const RunConfig& cfg, Json& report) {
  if (!cfg.periods) throw DomainError("config key 'periods' is required for simulate");
  if (!cfg.output) throw DomainError("simulate writes a CSV file; --output is required");
  const int T = *cfg.periods;
  if (!cfg.params_file && !cfg.inline_params)
    throw DomainError("simulate needs model parameters (inline or params_file)");
  const ModelParams p = initial_params(cfg, ObservedSeries{});
  std::vector<Vec2> varrho;
  if (cfg.varrho) {
    if (cfg.varrho->size() < static_cast<std::size_t>(T))
      throw DomainError("varrho covers fewer periods than 'periods'");
    varrho.assign(cfg.varrho->begin(), cfg.varrho->begin() + T);
  } else if (cfg.payout_ratio) {
    varrho.assign(static_cast<std::size_t>(T), cfg.payout_ratio->array().log().matrix());
  } else {
    throw DomainError("simulate needs a payout schedule: set varrho or payout_ratio");
  }
  const auto sim = simulate_company(p, varrho, cfg.B0, T, cfg.seed);
  BookPanel panel{cfg.first_period, sim.books, sim.payouts};
  {
    std::ofstream out(*cfg.output);
    if (!out) throw DomainError("cannot write " + *cfg.output);
    write_panel_csv(out, panel);
  }
  report = header("simulate", cfg, nullptr);
  report["params"] = to_json(p);
  report["periods"] = T;
  report["B0"] = to_json(cfg.B0);
  report["feasibility"] = feasibility(build_linearization_schedule(p, varrho));
  Json rows = Json::array();
  for (int t = 0; t <= T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    Json r{{"period", cfg.first_period + t},
           {"book", to_json(sim.books[i])},
           {"m", to_json(sim.m[i])},
           {"market_value", to_json(Vec2(sim.m[i].array().exp().matrix().cwiseProduct(sim.books[i])))}};
    if (t > 0) r["varrho"] = to_json(varrho[i - 1]);
    rows.push_back(r);
  }
  report["truth"] = rows;
  return 0;
}

void write_report(const Json& report, const std::optional<std::string>& path) {
  const std::string text = report.dump(2) + "\n";
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + *path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private company valuation: estimation, filtering, pricing and default probabilities"};
  app.require_subcommand(1);

  struct Flags {
    std::string input, config, output, check;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    int maturity = 0, max_iter = 0;
    double strike = 0.0, rate = 0.0, tol = 0.0;
  } flags;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&, Json&);
  };
  const Command commands[] = {
      {"simulate", "simulate a company panel (CSV) with its true multipliers", cmd_simulate},
      {"estimate", "fit the model parameters by EM", cmd_estimate},
      {"filter", "filtered multipliers and one-step predictions", cmd_filter},
      {"smooth", "smoothed multipliers and market values", cmd_smooth},
      {"forecast", "forecasts past the last observation", cmd_forecast},
      {"price", "option prices, equity and debt values", cmd_price},
      {"default-prob", "default probabilities at a threshold", cmd_default_prob},
      {"calibrate-threshold", "default threshold matching the filtered equity value", cmd_calibrate},
  };

  struct Bound {
    CLI::App* sub;
    const Command* cmd;
    CLI::Option *input, *config, *output, *seed, *paths, *maturity, *strike, *rate, *check, *max_iter, *tol;
  };
  std::vector<Bound> bound;
  for (const auto& c : commands) {
    Bound b{app.add_subcommand(c.name, c.help), &c, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
    b.input = b.sub->add_option("--input", flags.input, "panel CSV");
    b.config = b.sub->add_option("--config", flags.config, "JSON config file");
    b.output = b.sub->add_option("--output", flags.output, "output path (default: stdout)");
    b.seed = b.sub->add_option("--seed", flags.seed, "random seed");
    b.paths = b.sub->add_option("--paths", flags.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    b.maturity = b.sub->add_option("--maturity", flags.maturity, "periods to maturity")->check(CLI::PositiveNumber);
    b.strike = b.sub->add_option("--strike", flags.strike, "strike / nominal debt")->check(CLI::PositiveNumber);
    b.rate = b.sub->add_option("--rate", flags.rate, "risk-free rate per period")->check(CLI::Range(-0.999999, 1e6));
    b.check = b.sub->add_option("--check", flags.check, "embedded oracle check")->check(CLI::IsMember({"mc"}));
    b.max_iter = b.sub->add_option("--max-iter", flags.max_iter, "EM iteration cap")->check(CLI::NonNegativeNumber);
    b.tol = b.sub->add_option("--tol", flags.tol, "EM tolerance on parameter changes")->check(CLI::NonNegativeNumber);
    bound.push_back(b);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  const Bound* active = nullptr;
  for (const auto& b : bound)
    if (b.sub->parsed()) active = &b;

  Json report;
  try {
    RunConfig cfg = active->config->count() ? load_config(flags.config) : RunConfig{};
    if (active->input->count()) cfg.input = flags.input;
    if (active->output->count()) cfg.output = flags.output;
    if (active->seed->count()) cfg.seed = flags.seed;
    if (active->paths->count()) cfg.paths = flags.paths;
    if (active->maturity->count()) cfg.maturity = flags.maturity;
    if (active->strike->count()) cfg.strike = flags.strike;
    if (active->rate->count()) {
      cfg.rate = flags.rate;
      cfg.rate_given = true;
    }
    if (active->check->count()) cfg.check_mc = true;
    if (active->max_iter->count()) cfg.max_iter = flags.max_iter;
    if (active->tol->count()) cfg.tol = flags.tol;

    const int status = active->cmd->run(cfg, report);
    // simulate writes its CSV to --output; the truth sidecar goes next to it.
    const bool sim = std::string(active->cmd->name) == "simulate";
    const auto dest = sim ? std::optional<std::string>(cfg.truth_output.value_or(*cfg.output + ".truth.json"))
                          : cfg.output;
    write_report(report, dest);
    if (status == kExitNumerical) std::cerr << "error: " << report["em"].value("diagnostic", "EM aborted") << "\n";
    return status;
  } catch (const NoSolutionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoSolution;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

#include "pcm/pricing.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace pcm {

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

AssetMoments asset_moments(const HorizonMoments& hm, const AssetLinearization& at_T,
                           const Vec2& m, const Mat2& P, const Vec2& log_book_t, Measure measure) {
  AssetMoments a;
  a.weights = at_T.weights();
  const Vec2 center = hm.alpha * m + hm.beta(measure) + log_book_t;
  a.mean = a.weights.dot(center) + at_T.w_a * at_T.h_a;
  const Mat2 cov = hm.Sigma + hm.alpha * P * hm.alpha.transpose();
  a.var = std::max(0.0, a.weights.dot(cov * a.weights));
  return a;
}

void require_strike(double L) {
  if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("strike / threshold must be positive and finite");
}

}  // namespace

RiskNeutralSystem build_risk_neutral(const ModelParams& params,
                                     const LinearizationSchedule& schedule) {
  RiskNeutralSystem rn;
  rn.c = intercepts(params, schedule, Measure::Real);
  rn.c_tilde = intercepts(params, schedule, Measure::RiskNeutral);
  const Vec2 dv = params.Sigma_v.diagonal();
  const Vec2 du = params.Sigma_u.diagonal();
  for (int t = 1; t <= schedule.horizon(); ++t) {
    const auto& lin = schedule.at(t);
    const auto i = static_cast<std::size_t>(t - 1);
    Vec4 theta, alpha, q;
    theta << lin.g.cwiseProduct(Vec2::Constant(params.r_tilde) - params.k_tilde), 0.5 * dv;
    alpha << 0.5 * du.cwiseQuotient(lin.g), 0.5 * dv;
    q << rn.c[i], params.phi;
    rn.theta.push_back(theta);
    rn.alpha.push_back(alpha);
    rn.q_tilde.push_back(q + theta - alpha);
  }
  return rn;
}

Mat2 state_noise_loading(const LinearizationSchedule& schedule, int s, int T) {
  Mat2 C = -static_cast<double>(T - s) * Mat2::Identity();
  for (int j = s + 1; j <= T; ++j) C += schedule.at(j).G();
  return C;
}

HorizonMoments horizon_moments(const ModelParams& params, const LinearizationSchedule& schedule,
                               int t, int T) {
  if (t < 0 || t >= T) throw DomainError("horizon moments need 0 <= t < T");
  if (T > schedule.horizon()) throw DomainError("schedule does not reach the maturity");
  HorizonMoments hm;
  hm.t = t;
  hm.T = T;
  hm.alpha = -static_cast<double>(T - t - 1) * Mat2::Identity();
  hm.beta_rn = Vec2::Zero();
  hm.beta_real = Vec2::Zero();
  for (int i = t + 1; i <= T; ++i) {
    const auto& lin = schedule.at(i);
    hm.alpha += lin.G();
    const Vec2 drift = static_cast<double>(i - t - 1) * (lin.g.array() - 1.0).matrix().cwiseProduct(params.phi);
    hm.beta_rn += intercept(params, lin, Measure::RiskNeutral) + drift;
    hm.beta_real += intercept(params, lin, Measure::Real) + drift;
  }
  hm.Sigma = static_cast<double>(T - t) * params.Sigma_u;
  for (int s = t + 1; s <= T - 1; ++s) {
    const Mat2 C = state_noise_loading(schedule, s, T);
    hm.Sigma += C * params.Sigma_v * C.transpose();
  }
  hm.Sigma = symmetrize(hm.Sigma);
  return hm;
}

AssetMoments asset_log_moments_public(const HorizonMoments& hm, const AssetLinearization& at_T,
                                      const Vec2& m_t, const Vec2& log_book_t, Measure measure) {
  return asset_moments(hm, at_T, m_t, Mat2::Zero(), log_book_t, measure);
}

AssetMoments asset_log_moments_private(const HorizonMoments& hm, const AssetLinearization& at_T,
                                       const Vec2& m_filtered, const Mat2& P_filtered,
                                       const Vec2& log_book_t, Measure measure) {
  return asset_moments(hm, at_T, m_filtered, P_filtered, log_book_t, measure);
}

OptionPrices payoff_std_devs(double mean, double var, double L, int tau, double r_tilde) {
  const auto price = price_options(mean, var, L, tau, r_tilde);
  const double disc = std::exp(-tau * r_tilde);
  OptionPrices sd;
  if (var == 0.0) return sd;
  const double s = std::sqrt(var), l = std::log(L);
  const double a2 = std::exp(2.0 * mean + 2.0 * var), a1 = std::exp(mean + 0.5 * var);
  const double k2 = (mean + 2.0 * var - l) / s, k1 = (mean + var - l) / s, k0 = (mean - l) / s;
  // E[(A - L)+^2] and E[(L - A)+^2]
  const double c2 = a2 * norm_cdf(k2) - 2.0 * L * a1 * norm_cdf(k1) + L * L * norm_cdf(k0);
  const double p2 = a2 * norm_cdf(-k2) - 2.0 * L * a1 * norm_cdf(-k1) + L * L * norm_cdf(-k0);
  sd.call = std::sqrt(std::max(0.0, disc * disc * c2 - price.call * price.call));
  sd.put = std::sqrt(std::max(0.0, disc * disc * p2 - price.put * price.put));
  return sd;
}

double discounted_asset_value(double mean, double var, int tau, double r_tilde) {
  return std::exp(mean - tau * r_tilde + 0.5 * var);
}

OptionPrices price_options(double mean, double var, double L, int tau, double r_tilde) {
  require_strike(L);
  if (!std::isfinite(mean) || !(var >= 0.0)) throw DomainError("invalid asset moments");
  const double disc = std::exp(-tau * r_tilde);
  OptionPrices p;
  if (var == 0.0) {
    const double v = std::exp(mean);
    p.call = disc * std::max(v - L, 0.0);
    p.put = disc * std::max(L - v, 0.0);
    return p;
  }
  const double sd = std::sqrt(var);
  const double d1 = (mean + var - std::log(L)) / sd;
  const double d2 = d1 - sd;
  const double fwd = discounted_asset_value(mean, var, tau, r_tilde);
  p.call = std::max(0.0, fwd * norm_cdf(d1) - disc * L * norm_cdf(d2));
  p.put = std::max(0.0, disc * L * norm_cdf(-d2) - fwd * norm_cdf(-d1));
  return p;
}

EquityDebt equity_debt_values(const OptionPrices& prices, double L, int tau, double r_tilde) {
  return {prices.call, L * std::exp(-tau * r_tilde) - prices.put};
}

double solve_threshold(double target, double mean, double var, int tau, double r_tilde) {
  if (!(target > 0.0) || !std::isfinite(target)) throw DomainError("target equity value must be positive");
  const double cap = discounted_asset_value(mean, var, tau, r_tilde);
  if (target >= cap)
    throw NoSolutionError("target equity value is not below the zero-strike call value");
  if (var == 0.0) return std::exp(mean) - target * std::exp(tau * r_tilde);

  auto call = [&](double L) { return price_options(mean, var, L, tau, r_tilde).call; };
  double hi = std::exp(mean);
  for (int i = 0; i < 2100 && call(hi) >= target; ++i) hi *= 2.0;
  double lo = hi;
  for (int i = 0; i < 2100 && call(lo) <= target; ++i) lo *= 0.5;
  if (!(call(lo) > target) || !(call(hi) < target) || lo == 0.0 || !std::isfinite(hi))
    throw NoSolutionError("could not bracket the default threshold");
  for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-15; ++it) {
    const double mid = std::sqrt(lo) * std::sqrt(hi);
    if (mid <= lo || mid >= hi) break;
    (call(mid) > target ? lo : hi) = mid;
  }
  // Pick the endpoint that reprices closer.
  return std::abs(call(lo) - target) <= std::abs(call(hi) - target) ? lo : hi;
}

double default_probability(double mean, double var, double L) {
  require_strike(L);
  if (var == 0.0) return std::log(L) >= mean ? 1.0 : 0.0;
  return norm_cdf((std::log(L) - mean) / std::sqrt(var));
}

PricingContext prepare_pricing(const ModelParams& params, const ObservedSeries& series,
                               std::span<const Vec2> future_varrho, int tau) {
  params.validate();
  series.validate();
  if (tau < 1) throw DomainError("maturity must be at least one period");
  if (static_cast<int>(future_varrho.size()) < tau)
    throw DomainError("need varrho_tilde for " + std::to_string(tau) +
                      " future periods, got " + std::to_string(future_varrho.size()));
  PricingContext ctx;
  ctx.params = params;
  ctx.series = series;
  const int Tobs = series.T();
  const int T = Tobs + tau;

  std::vector<Vec2> varrho = series.varrho_tilde;
  varrho.insert(varrho.end(), future_varrho.begin(), future_varrho.begin() + tau);
  ctx.schedule = build_linearization_schedule(params, varrho);

  const auto c = intercepts(params, ctx.schedule, Measure::Real);
  const auto ct = intercepts(params, ctx.schedule, Measure::RiskNeutral);
  ctx.filter_real = run_filter(params, ctx.schedule, series.b_tilde, c);
  ctx.filter_rn = run_filter(params, ctx.schedule, series.b_tilde, ct);
  const auto fc = forecast(ctx.filter_real, params, ctx.schedule, c, T);
  ctx.log_books = forecast_log_books(series, fc);
  attach_asset_linearization(ctx.schedule, params, ctx.log_books);
  ctx.moments = horizon_moments(params, ctx.schedule, Tobs, T);
  return ctx;
}

InfoSetResult price_private(const PricingContext& ctx, double L) {
  InfoSetResult r;
  r.moments = asset_log_moments_private(ctx.moments, ctx.asset_T(), ctx.filter_rn.multiplier(ctx.t()),
                                        ctx.filter_rn.multiplier_cov(ctx.t()), ctx.log_book_t(),
                                        Measure::RiskNeutral);
  r.prices = price_options(r.moments.mean, r.moments.var, L, ctx.tau(), ctx.params.r_tilde);
  r.values = equity_debt_values(r.prices, L, ctx.tau(), ctx.params.r_tilde);
  return r;
}

InfoSetResult price_public(const PricingContext& ctx, double L, const Vec2& m_t) {
  InfoSetResult r;
  r.moments = asset_log_moments_public(ctx.moments, ctx.asset_T(), m_t, ctx.log_book_t(),
                                       Measure::RiskNeutral);
  r.prices = price_options(r.moments.mean, r.moments.var, L, ctx.tau(), ctx.params.r_tilde);
  r.values = equity_debt_values(r.prices, L, ctx.tau(), ctx.params.r_tilde);
  return r;
}

AssetMoments default_moments_private(const PricingContext& ctx) {
  return asset_log_moments_private(ctx.moments, ctx.asset_T(), ctx.filter_real.multiplier(ctx.t()),
                                   ctx.filter_real.multiplier_cov(ctx.t()), ctx.log_book_t(),
                                   Measure::Real);
}

AssetMoments default_moments_public(const PricingContext& ctx, const Vec2& m_t) {
  return asset_log_moments_public(ctx.moments, ctx.asset_T(), m_t, ctx.log_book_t(), Measure::Real);
}

double default_probability_private(const PricingContext& ctx, double L_bar) {
  const auto a = default_moments_private(ctx);
  return default_probability(a.mean, a.var, L_bar);
}

double default_probability_public(const PricingContext& ctx, double L_bar, const Vec2& m_t) {
  const auto a = default_moments_public(ctx, m_t);
  return default_probability(a.mean, a.var, L_bar);
}

double equity_value_target(const PricingContext& ctx) {
  const int t = ctx.t();
  return std::exp(ctx.filter_real.multiplier(t)[0] + ctx.log_books[static_cast<std::size_t>(t)][0]);
}

double calibrate_default_threshold(const PricingContext& ctx, std::optional<double> target) {
  const double tgt = target.value_or(equity_value_target(ctx));
  const auto r = price_private(ctx, 1.0);
  return solve_threshold(tgt, r.moments.mean, r.moments.var, ctx.tau(), ctx.params.r_tilde);
}

}  // namespace pcm

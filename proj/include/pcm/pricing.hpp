#pragma once

// Risk-neutral valuation of the company's assets: horizon moments of the log
// market values, Black-Scholes type option prices on the asset value, the
// implied equity and debt values, default thresholds and default
// probabilities under public and private information.

#include "pcm/state_space.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace pcm {

/// Per-period quantities of the measure change. theta_t and alpha_t act on
/// the stacked (b~_t, m~_t) intercept q_t = (c_t', phi')', giving
/// q~_t = q_t + theta_t - alpha_t = (c~_t', phi')'.
struct RiskNeutralSystem {
  std::vector<Vec2> c;        // real-measure intercepts, t = 1..H at index t-1
  std::vector<Vec2> c_tilde;  // risk-neutral intercepts
  std::vector<Vec4> theta;    // (G_t (r~ i - k~), 1/2 D[Sigma_v])
  std::vector<Vec4> alpha;    // 1/2 (D[Sigma_u] / g_t, D[Sigma_v])
  std::vector<Vec4> q_tilde;
};

RiskNeutralSystem build_risk_neutral(const ModelParams& params,
                                     const LinearizationSchedule& schedule);

/// Moments of V~_T = m~_T + ln B_T given m~_t and ln B_t:
///   mean alpha m~_t + beta + ln B_t, covariance Sigma.
struct HorizonMoments {
  int t = 0;
  int T = 0;
  Mat2 alpha;      // sum_{i=t+1}^T G_i - (T-t-1) I
  Vec2 beta_rn;    // sum c~_i + sum (i-t-1)(G_i - I) phi
  Vec2 beta_real;  // same with c_i
  Mat2 Sigma;      // (T-t) Sigma_u + sum_{s=t+1}^{T-1} C_s Sigma_v C_s'

  int tau() const { return T - t; }
  const Vec2& beta(Measure m) const { return m == Measure::Real ? beta_real : beta_rn; }
};

/// Requires 0 <= t < T <= schedule.horizon().
HorizonMoments horizon_moments(const ModelParams& params, const LinearizationSchedule& schedule,
                               int t, int T);

/// Noise loading C_s = sum_{j=s+1}^T G_j - (T-s) I of v_s on V~_T.
Mat2 state_noise_loading(const LinearizationSchedule& schedule, int s, int T);

/// Gaussian moments of the linearized log asset value V~a_T.
struct AssetMoments {
  double mean = 0.0;
  double var = 0.0;
  Vec2 weights;  // (1 - w_a, w_a) at T

  double sd() const { return std::sqrt(var); }
};

/// Public information: m~_t known.
///   mean = w' (alpha m~_t + beta + ln B_t) + w_a h_a,  var = w' Sigma w.
AssetMoments asset_log_moments_public(const HorizonMoments& hm, const AssetLinearization& at_T,
                                      const Vec2& m_t, const Vec2& log_book_t, Measure measure);

/// Private information: m~_t ~ N(m_{t|t}, P_{t|t}) from the filter.
///   mean as above at m_{t|t},  var = w' (Sigma + alpha P alpha') w.
AssetMoments asset_log_moments_private(const HorizonMoments& hm, const AssetLinearization& at_T,
                                       const Vec2& m_filtered, const Mat2& P_filtered,
                                       const Vec2& log_book_t, Measure measure);

struct OptionPrices {
  double call = 0.0;
  double put = 0.0;
};

/// European call and put on exp(X), X ~ N(mean, var) under the pricing
/// measure, strike L, discounted over tau periods at r~. var = 0 uses the
/// deterministic payoff.
OptionPrices price_options(double mean, double var, double L, int tau, double r_tilde);

/// Standard deviations of the discounted call and put payoffs when
/// log A ~ N(mean, var). Dividing by sqrt(n) gives the standard error of an
/// n-path Monte Carlo price, defined even when no simulated path exercises.
OptionPrices payoff_std_devs(double mean, double var, double L, int tau, double r_tilde);

/// exp(mean - tau r~ + var/2), the call value as the strike tends to zero.
double discounted_asset_value(double mean, double var, int tau, double r_tilde);

struct EquityDebt {
  double equity = 0.0;
  double debt = 0.0;
};

/// equity = C, debt = L exp(-tau r~) - P.
EquityDebt equity_debt_values(const OptionPrices& prices, double L, int tau, double r_tilde);

/// Solves C(L) = target for L by bracketing and geometric bisection.
/// Throws NoSolutionError when target is at or above C(0+), DomainError
/// when target <= 0.
double solve_threshold(double target, double mean, double var, int tau, double r_tilde);

/// Phi((ln L - mean) / sd); the indicator {ln L >= mean} when var = 0.
double default_probability(double mean, double var, double L);

/// Everything the pricing operations need for one maturity: a schedule over
/// T = T_obs + tau periods with asset constants attached, filters under both
/// measures and the horizon moments from t = T_obs to T.
struct PricingContext {
  ModelParams params;
  ObservedSeries series;
  LinearizationSchedule schedule;
  FilterOutput filter_real;
  FilterOutput filter_rn;
  std::vector<Vec2> log_books;  // t = 0..T; observed, then forecast under the real measure
  HorizonMoments moments;

  int t() const { return moments.t; }
  int T() const { return moments.T; }
  int tau() const { return moments.tau(); }
  const AssetLinearization& asset_T() const { return schedule.asset_at(T()); }
  const Vec2& log_book_t() const { return log_books[static_cast<std::size_t>(t())]; }
};

/// future_varrho supplies varrho~ for T_obs+1..T_obs+tau. Throws
/// InfeasibleLinearization when the schedule over the horizon is infeasible.
PricingContext prepare_pricing(const ModelParams& params, const ObservedSeries& series,
                               std::span<const Vec2> future_varrho, int tau);

struct InfoSetResult {
  AssetMoments moments;
  OptionPrices prices;
  EquityDebt values;
};

/// Private-information prices from the risk-neutral filter at T_obs.
InfoSetResult price_private(const PricingContext& ctx, double L);
/// Public-information prices given the multiplier at T_obs.
InfoSetResult price_public(const PricingContext& ctx, double L, const Vec2& m_t);

/// Private default probability from the real-measure filter at T_obs.
double default_probability_private(const PricingContext& ctx, double L_bar);
double default_probability_public(const PricingContext& ctx, double L_bar, const Vec2& m_t);

/// Real-measure asset moments behind the default probabilities.
AssetMoments default_moments_private(const PricingContext& ctx);
AssetMoments default_moments_public(const PricingContext& ctx, const Vec2& m_t);

/// exp(m^e_{t|t}) B^e_t at t = T_obs from the real-measure filter.
double equity_value_target(const PricingContext& ctx);

/// L-bar such that the private call equals the target equity value.
double calibrate_default_threshold(const PricingContext& ctx,
                                   std::optional<double> target = std::nullopt);

}  // namespace pcm

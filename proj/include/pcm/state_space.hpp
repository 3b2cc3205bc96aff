#pragma once

// Linear-Gaussian state-space form of the valuation model.
//
//   measurement  b_t = Psi_t z_t + c_t + u_t,   Psi_t = [-I, G_t]   (2x4)
//   transition   z_t = A z_{t-1} + a + eta_t,  A = [[I, 0], [I, 0]]
//
// with state z_t = (m_t', m_{t-1}')', a = (phi', 0')' and
// Cov(eta_t) = diag{Sigma_v, 0}.

#include "pcm/model.hpp"

#include <span>
#include <vector>

namespace pcm {

Mat24 measurement_matrix(const PeriodLinearization& lin);
Mat4 transition_matrix();
Vec4 transition_intercept(const ModelParams& params);
Mat4 state_noise(const ModelParams& params);

struct FilterState {
  Vec4 z;
  Mat4 P;
};

/// One-step-ahead moments of the state and of the observation.
struct Prediction {
  Vec4 z;
  Mat4 P;
  Vec2 b;
  Mat2 S;
};

struct FilterStep {
  Prediction pred;
  Mat42 gain;
  FilterState filt;
  double loglik = 0.0;  // ln N(b_t; b_{t|t-1}, S_t)
};

struct FilterOutput {
  FilterState initial;
  std::vector<FilterStep> steps;  // t = 1..T at index t-1
  double loglik = 0.0;

  int T() const { return static_cast<int>(steps.size()); }
  /// Filtered state at t = 0..T.
  const FilterState& filtered(int t) const;
  Vec2 multiplier(int t) const { return filtered(t).z.head<2>(); }
  Mat2 multiplier_cov(int t) const { return filtered(t).P.topLeftCorner<2, 2>(); }
};

/// z_{0|0} = (mu0', mu0')', P = diag{Sigma0, Sigma0}.
FilterState init_filter(const ModelParams& params);

/// Prediction for period t from the filtered state at t-1.
Prediction predict_step(const FilterState& prev, const ModelParams& params,
                        const PeriodLinearization& lin, const Vec2& intercept);

/// Kalman correction. Throws NumericalError when the innovation covariance is
/// not numerically positive definite.
FilterStep correct_step(const Prediction& pred, const Mat24& Psi, const Vec2& observation);

/// Forward pass over t = 1..T, T = observations.size(). The intercepts select
/// the measure (c_t or c~_t); they must cover at least T periods.
FilterOutput run_filter(const ModelParams& params, const LinearizationSchedule& schedule,
                        std::span<const Vec2> observations, std::span<const Vec2> intercepts);

FilterOutput run_filter(const ModelParams& params, const LinearizationSchedule& schedule,
                        const ObservedSeries& series, Measure measure);

struct SmootherOutput {
  std::vector<Vec4> z;      // z_{t|T}, t = 0..T
  std::vector<Mat4> P;      // Sigma(z_t|T)
  std::vector<Mat4> gain;   // S_t, t = 0..T-1
  std::vector<Mat4> cross;  // Sigma(z_t, z_{t+1}|T) = S_t Sigma(z_{t+1}|T), t = 0..T-1

  int T() const { return static_cast<int>(z.size()) - 1; }
  Vec2 multiplier(int t) const { return z[static_cast<std::size_t>(t)].head<2>(); }
  Mat2 multiplier_cov(int t) const {
    return P[static_cast<std::size_t>(t)].topLeftCorner<2, 2>();
  }
  /// Cov(m_{t-1}, m_t | F_T) for t = 1..T, via the smoother cross-covariance.
  Mat2 multiplier_cross(int t) const {
    return cross[static_cast<std::size_t>(t - 1)].topLeftCorner<2, 2>();
  }
};

/// Backward (Rauch-Tung-Striebel) pass.
///
/// The predicted covariance Sigma(z_{t+1}|t) is singular whenever the
/// filtered multiplier covariance is, because its second block duplicates
/// m_t. Given m_t, m_{t+1} carries no further information about z_t, so the
/// gain only acts on the second block of the residual:
///   S_t = [[0, I], [0, P21 P11^+]]
/// where P11, P21 are blocks of Sigma(z_t|t). This equals
/// Sigma(z_t|t) A' Sigma(z_{t+1}|t)^{-1} whenever the inverse exists.
SmootherOutput smooth(const FilterOutput& filter);

struct ForecastStep {
  int t = 0;
  Vec4 z;
  Mat4 P;
  Vec2 b;
  Mat2 S;
};

/// Forecasts for t = T+1..H given F_T. intercepts must cover H periods.
std::vector<ForecastStep> forecast(const FilterOutput& filter, const ModelParams& params,
                                   const LinearizationSchedule& schedule,
                                   std::span<const Vec2> intercepts, int H);

/// ln B_t for t = 0..H: observed through T, then ln B_{t-1} + b_{t|T}.
std::vector<Vec2> forecast_log_books(const ObservedSeries& series,
                                     std::span<const ForecastStep> forecasts);

}  // namespace pcm

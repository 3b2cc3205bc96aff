#pragma once

// Data model of the log private company valuation model and its
// deterministic linearization constants.
//
//   b_t = -m_t + G_t m_{t-1} + c_t + u_t      (log book growth)
//   m_t = phi + m_{t-1} + v_t                  (log market-to-book multiplier)
//
// with c_t = G_t k - (G_t - I) rho_t - h_t under the real measure.

#include "pcm/types.hpp"

#include <span>
#include <vector>

namespace pcm {

struct ModelParams {
  Vec2 k_tilde = Vec2::Zero();  // log required returns ln(1 + k)
  Vec2 mu0 = Vec2::Zero();      // prior mean of m_0
  Mat2 Sigma0 = Mat2::Identity();
  Vec2 phi = Vec2::Zero();  // multiplier drift
  Mat2 Sigma_u = Mat2::Identity();
  Mat2 Sigma_v = Mat2::Identity();
  double r_tilde = 0.0;  // log risk-free rate ln(1 + r)

  /// Throws DomainError unless every entry is finite, Sigma_u and Sigma_v are
  /// symmetric PSD and Sigma0 is symmetric PSD. Positive definiteness of the
  /// noise covariances is checked where it is needed (innovation and density
  /// evaluations), so degenerate test configurations remain constructible.
  void validate() const;
};

/// Observed book data: B_0 plus per-period log growth rates and log
/// payout-to-book ratios for t = 1..T (stored at index t-1).
struct ObservedSeries {
  Vec2 B0 = Vec2::Ones();
  std::vector<Vec2> b_tilde;
  std::vector<Vec2> varrho_tilde;

  int T() const { return static_cast<int>(b_tilde.size()); }

  /// ln B_t for t = 0..T.
  std::vector<Vec2> log_books() const;
  /// B_t for t = 0..T.
  std::vector<Vec2> books() const;

  void validate() const;
};

/// Builds the observed series from raw book values (T+1 rows, B_0 first) and
/// payouts (T rows, p_1 first). Rejects nonpositive cells.
ObservedSeries derive_series(std::span<const Vec2> books, std::span<const Vec2> payouts);

/// E[m_t | F_0] = mu0 + t phi.
Vec2 mean_log_multiplier(const ModelParams& params, int t);

/// Linearization constants of one period.
struct PeriodLinearization {
  Vec2 varrho;  // log payout-to-book ratio of the period
  Vec2 varphi;  // rho_t - k - (mu0 + (t-1) phi)
  Vec2 g;
  Vec2 h;
  Vec2 mu;  // mean log payout-to-value

  Mat2 G() const { return g.asDiagonal(); }
};

/// Constants from varphi alone; throws InfeasibleLinearization (with the
/// given period) when exp(varphi) >= 1 in a component.
PeriodLinearization linearize_period(const Vec2& varphi, const Vec2& varrho, int period);

/// Linearization of ln(V^e + V^l) around E[V~^e - V~^l] = mu_a.
struct AssetLinearization {
  double mu_a = 0.0;
  double g_a = 2.0;
  double w_a = 0.5;
  double h_a = 0.0;

  /// Weights on (V~^e, V~^l): the equity share 1 - w_a and the liability
  /// share w_a at the expansion point.
  Vec2 weights() const { return {1.0 - w_a, w_a}; }
};

AssetLinearization asset_linearization(double mu_a);

/// Linearized log asset value (1 - w_a) V~^e + w_a V~^l + w_a h_a.
double linearized_log_asset(const AssetLinearization& lin, const Vec2& log_values);

/// Exact ln(V^e + V^l) from log values.
double exact_log_asset(const Vec2& log_values);

/// mu_a_t = (mu0 + t phi)^e - (mu0 + t phi)^l + ln B^e_t - ln B^l_t.
double asset_center(const ModelParams& params, const Vec2& log_book_t, int t);

/// Per-period constants for t = 1..H and, once attached, asset constants for
/// t = 0..H.
class LinearizationSchedule {
 public:
  LinearizationSchedule() = default;
  explicit LinearizationSchedule(std::vector<PeriodLinearization> periods)
      : periods_(std::move(periods)) {}

  int horizon() const { return static_cast<int>(periods_.size()); }
  const PeriodLinearization& at(int t) const;
  std::span<const PeriodLinearization> periods() const { return periods_; }

  bool has_asset() const { return !asset_.empty(); }
  const AssetLinearization& asset_at(int t) const;
  void set_asset(std::vector<AssetLinearization> asset);

  /// max over periods and components of exp(varphi_t).
  double max_exp_varphi() const;

 private:
  std::vector<PeriodLinearization> periods_;
  std::vector<AssetLinearization> asset_;
};

/// Schedule over H = varrho.size() periods. Throws InfeasibleLinearization at
/// the first period where exp(varphi_t) >= 1.
LinearizationSchedule build_linearization_schedule(const ModelParams& params,
                                                   std::span<const Vec2> varrho);

/// Attaches asset constants from plug-in log books ln B_t, t = 0..H.
void attach_asset_linearization(LinearizationSchedule& schedule, const ModelParams& params,
                                std::span<const Vec2> log_books);

/// c_t (real) or c~_t (risk-neutral) for one period.
Vec2 intercept(const ModelParams& params, const PeriodLinearization& lin, Measure measure);

/// Intercepts for t = 1..H (index t-1).
std::vector<Vec2> intercepts(const ModelParams& params, const LinearizationSchedule& schedule,
                             Measure measure);

}  // namespace pcm

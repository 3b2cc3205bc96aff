#pragma once

// Exact Gaussian simulation of the model under either measure, Monte Carlo
// estimators, and a diagnostic for the log asset linearization.

#include "pcm/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pcm {

/// SplitMix64; one independent stream per (seed, stream index).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  SplitMix64(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

 private:
  std::uint64_t state_;
};

struct SimConfig {
  std::size_t n_paths = 1;
  int horizon = 1;  // periods simulated after the start
  std::uint64_t seed = 0;
  Measure measure = Measure::Real;
  bool antithetic = false;     // paths 2j, 2j+1 share negated draws; n_paths must be even
  bool terminal_only = false;  // keep only the last period of each path
};

/// m~_{t0} ~ N(m_mean, m_cov) with known ln B_{t0}.
struct PanelStart {
  int t0 = 0;
  Vec2 log_book = Vec2::Zero();
  Vec2 m_mean = Vec2::Zero();
  Mat2 m_cov = Mat2::Zero();
};

/// Start at t = 0 from the prior N(mu0, Sigma0).
PanelStart prior_start(const ModelParams& params, const Vec2& B0);

/// Paths over periods t0..t0+horizon. Stored periods are k = 0..horizon, or
/// only k = horizon with terminal_only.
class SimulatedPanel {
 public:
  int t0 = 0;
  int horizon = 0;
  std::size_t n_paths = 0;
  bool antithetic = false;
  bool terminal_only = false;
  bool has_asset = false;

  int stored_periods() const { return terminal_only ? 1 : horizon + 1; }
  /// k is the offset from t0; with terminal_only only k = horizon exists.
  const Vec2& m(std::size_t path, int k) const { return m_[index(path, k)]; }
  const Vec2& log_book(std::size_t path, int k) const { return log_book_[index(path, k)]; }
  /// b~_{t0+k}; zero at k = 0.
  const Vec2& b(std::size_t path, int k) const { return b_[index(path, k)]; }
  Vec2 log_value(std::size_t path, int k) const { return m(path, k) + log_book(path, k); }
  double asset_exact(std::size_t path, int k) const { return asset_exact_[index(path, k)]; }
  double asset_linearized(std::size_t path, int k) const { return asset_lin_[index(path, k)]; }

 private:
  friend SimulatedPanel simulate_panel(const ModelParams&, const LinearizationSchedule&,
                                       const PanelStart&, const SimConfig&);
  std::size_t index(std::size_t path, int k) const;

  std::vector<Vec2> m_, log_book_, b_;
  std::vector<double> asset_exact_, asset_lin_;
};

/// Draws u_t ~ N(0, Sigma_u), v_t ~ N(0, Sigma_v) and propagates
///   m_t = phi + m_{t-1} + v_t,  b_t = -m_t + G_t m_{t-1} + c_t + u_t
/// with c_t or c~_t by measure. The schedule must cover t0+horizon; asset
/// values are recorded when it carries asset constants.
SimulatedPanel simulate_panel(const ModelParams& params, const LinearizationSchedule& schedule,
                              const PanelStart& start, const SimConfig& config);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;  // paths behind the estimate
};

/// Mean and standard error of per-path values; antithetic pairs are
/// averaged first. Sums are pairwise.
McEstimate mc_mean(std::span<const double> values, bool antithetic);

double pairwise_sum(std::span<const double> values);

/// Discounted mean of (Va_T - L)+ (or (L - Va_T)+) using the linearized
/// terminal log asset value.
McEstimate mc_option_price(const SimulatedPanel& panel, double L, int tau, double r_tilde,
                           bool call = true);

/// Frequency of {Va_T <= ln L-bar} at the terminal period.
McEstimate mc_default_probability(const SimulatedPanel& panel, double L_bar);

/// One simulated company in raw form, as ingested from CSV.
struct SyntheticCompany {
  std::vector<Vec2> books;    // B_0..B_T
  std::vector<Vec2> payouts;  // p_t = exp(varrho~_t) B_{t-1}, t = 1..T
  std::vector<Vec2> m;        // true m~_t, t = 0..T
};

/// Simulates T periods under the real measure from the prior at B_0.
/// varrho must cover T periods and give a feasible schedule.
SyntheticCompany simulate_company(const ModelParams& params, std::span<const Vec2> varrho,
                                  const Vec2& B0, int T, std::uint64_t seed);

struct LinearizationErrorReport {
  std::vector<double> max_abs;   // per stored period
  std::vector<double> mean_abs;  // per stored period
  double overall_max = 0.0;
  double overall_mean = 0.0;
};

/// |exact - linearized| log asset value per stored period.
LinearizationErrorReport linearization_error_report(const SimulatedPanel& panel);

}  // namespace pcm

#pragma once

// Maximum likelihood estimation of the model parameters by the EM
// iteration built on the Kalman smoother.
//
// The linearization constants g_t, h_t depend on (k~, mu0, phi). The
// expected complete-data log-likelihood Lambda is therefore evaluated with
// the schedule rebuilt from the parameters being scored, while the smoothed
// posterior of the multipliers stays fixed at the E-step parameters. The
// M-step maximizes that function, so every iteration is a true EM step and
// the observed-data likelihood does not decrease.

#include "pcm/state_space.hpp"

#include <string>
#include <vector>

namespace pcm {

/// Smoothed posterior moments of the log multipliers given F_T.
struct MultiplierPosterior {
  std::vector<Vec2> mean;  // m_{t|T}, t = 0..T
  std::vector<Mat2> var;   // Var(m_t|F_T), t = 0..T
  std::vector<Mat2> lag;   // Cov(m_t, m_{t-1}|F_T), t = 1..T at index t-1

  int T() const { return static_cast<int>(mean.size()) - 1; }
};

MultiplierPosterior multiplier_posterior(const SmootherOutput& smoothed);

/// Smoothed residual statistics of one parameter vector.
struct SmoothedStats {
  MultiplierPosterior post;
  std::vector<Vec2> u;    // u_{t|T}, t = 1..T at index t-1
  std::vector<Vec2> v;    // v_{t|T}
  std::vector<Vec2> d;    // d_{t|T} = G_t (G_t - I)(m_{t-1|T} - mu0 - (t-1) phi)
  std::vector<Mat2> Euu;  // E[u_t u_t' | F_T]
  std::vector<Mat2> Evv;  // E[v_t v_t' | F_T]
  std::vector<Mat2> Z;    // Cov(d_t, u_t | F_T), so E[d_t u_t'] = d u' + Z
  Vec2 m0_mean;
  Mat2 m0_var;
  Vec2 mT_mean;

  int T() const { return post.T(); }
  /// E[d_t u_t' | F_T].
  Mat2 Edu(int t) const;
};

/// Residual statistics of `params` under a fixed multiplier posterior, using
/// the supplied schedule for g_t, h_t.
SmoothedStats residual_stats(const ModelParams& params, const LinearizationSchedule& schedule,
                             const ObservedSeries& series, const MultiplierPosterior& post);

/// Filter and smoother under real-measure intercepts followed by
/// residual_stats. Throws InfeasibleLinearization for an infeasible schedule.
SmoothedStats e_step(const ModelParams& params, const ObservedSeries& series);

/// Lambda from precomputed statistics. Each Gaussian block (u, v, m_0) whose
/// covariance is exactly zero is dropped, a degenerate component carrying no
/// density; a covariance that is neither zero nor positive definite throws
/// DomainError.
double expected_complete_loglik(const ModelParams& params, const SmoothedStats& stats);

/// Lambda(params | F_T) with g_t, h_t rebuilt from params. Returns -infinity
/// when the schedule of params is infeasible.
double expected_complete_loglik(const ModelParams& params, const ObservedSeries& series,
                                const MultiplierPosterior& post);

/// Gradient of Lambda in (k~, mu0, phi), ordered (k~_e, k~_l, mu0_e, mu0_l,
/// phi_e, phi_l). Accounts for the dependence of g_t, h_t on the parameters.
Eigen::Matrix<double, 6, 1> expected_loglik_gradient(const ModelParams& params,
                                                     const ObservedSeries& series,
                                                     const MultiplierPosterior& post);

struct MStepOptions {
  int max_cycles = 200;       // block alternations in the singular fallback
  int max_newton = 100;       // Newton iterations per cycle
  double grad_tol = 1e-10;    // on |gradient|_inf / (1 + T)
  double param_tol = 1e-13;   // on the largest parameter change of a cycle
};

struct MStepResult {
  ModelParams params;
  int cycles = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Maximizes Lambda(. | F_T) over theta for a fixed multiplier posterior.
/// The covariances are profiled out in closed form,
///   Sigma_u = mean E[u u'],  Sigma_v = mean E[v v'],
///   Sigma0 = Var(m_0|F_T) + (m_{0|T} - mu0)(m_{0|T} - mu0)',
/// and (k~, mu0, phi) maximize the profile by damped Newton steps. When a
/// covariance estimate is singular the blocks are alternated instead.
/// Coordinates without density are held fixed (mu0 when Sigma0 = 0, phi when
/// Sigma_v = 0). Throws NumericalError on a singular Hessian (degenerate
/// design).
MStepResult m_step(const ModelParams& current, const ObservedSeries& series,
                   const MultiplierPosterior& post, const MStepOptions& options = {});

struct EmOptions {
  int max_iter = 500;
  double tol = 1e-8;  // on the largest absolute parameter change
  MStepOptions m_step;
};

struct EmIteration {
  ModelParams params;        // theta at the start of the iteration
  double loglik = 0.0;       // observed-data log-likelihood at params
  double lambda_old = 0.0;   // Lambda(params | posterior of params)
  double lambda_new = 0.0;   // Lambda(update | posterior of params)
  double max_change = 0.0;   // |update - params|_inf
};

struct EmTrace {
  std::vector<EmIteration> iterations;
  std::string termination;  // "converged", "max_iter" or "aborted"
  std::string diagnostic;   // reason for an aborted run
  double final_loglik = 0.0;
  std::vector<std::string> warnings;
};

struct EmResult {
  ModelParams params;
  EmTrace trace;
};

/// Zig-zag iteration from `init`. An infeasible init throws; a numerical
/// failure mid-run stops with the last good parameters and a diagnostic.
EmResult em_fit(const ObservedSeries& series, const ModelParams& init,
                const EmOptions& options = {});

/// Deterministic start: phi = OLS slope of varrho~_t on t, k~ = r~ + 0.02,
/// Sigma_u = Sigma_v = 0.01 I, Sigma0 = I, mu0 = 0 unless that is infeasible,
/// in which case the component is raised until its largest exp(varphi_t)
/// equals 1/2.
ModelParams default_initial_params(const ObservedSeries& series, double r_tilde);

/// Largest absolute difference across all parameter entries.
double max_param_change(const ModelParams& a, const ModelParams& b);

/// V_{t|T} = exp(m_{t|T}) B_t for t = 0..T.
std::vector<Vec2> smoothed_market_values(const SmoothedStats& stats, const ObservedSeries& series);

/// True when every g_t is within tol of 1, leaving k~ weakly identified.
bool weak_payout_identification(const LinearizationSchedule& schedule, double tol = 1e-6);

}  // namespace pcm

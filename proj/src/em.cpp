#include "pcm/em.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace pcm {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2 pi)

Vec6 pack_means(const ModelParams& p) {
  Vec6 x;
  x << p.k_tilde, p.mu0, p.phi;
  return x;
}

void unpack_means(ModelParams& p, const Vec6& x) {
  p.k_tilde = x.segment<2>(0);
  p.mu0 = x.segment<2>(2);
  p.phi = x.segment<2>(4);
}

// Contribution of a bivariate Gaussian block with n draws:
//   -n ln(2 pi) - n/2 ln|S| - 1/2 tr(S^{-1} sum E[x x']).
double gaussian_block(const Mat2& S, const Mat2& second_moment_sum, double n, const char* name) {
  if (S.isZero(0.0)) return 0.0;
  Eigen::LLT<Mat2> llt(symmetrize(S));
  if (llt.info() != Eigen::Success || !is_pd(S))
    throw DomainError(std::string(name) + " must be positive definite to evaluate the likelihood");
  const Mat2 L = llt.matrixL();
  const double log_det = 2.0 * (std::log(L(0, 0)) + std::log(L(1, 1)));
  const double quad = llt.solve(second_moment_sum).trace();
  return -n * kLog2Pi - 0.5 * n * log_det - 0.5 * quad;
}

Mat2 inverse_or_zero(const Mat2& S) {
  if (S.isZero(0.0)) return Mat2::Zero();
  Eigen::LLT<Mat2> llt(symmetrize(S));
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  return llt.solve(Mat2::Identity());
}

std::array<bool, 6> free_coordinates(const ModelParams& p) {
  const bool mu_free = !p.Sigma0.isZero(0.0);
  const bool phi_free = !p.Sigma_v.isZero(0.0);
  return {true, true, mu_free, mu_free, phi_free, phi_free};
}

void set_covariances(ModelParams& p, const SmoothedStats& s);
Vec6 gradient_from_stats(const ModelParams& params, const LinearizationSchedule& schedule,
                         const SmoothedStats& s);

// Lambda as a function of the mean block. With `profile` set the covariances
// are replaced by their closed-form maximizers at x; by the envelope theorem
// the partial gradient at those covariances is the gradient of the profile.
// The residual statistics depend on the mean block only.
struct Objective {
  const ObservedSeries& series;
  const MultiplierPosterior& post;
  ModelParams base;
  bool profile = false;

  struct Eval {
    ModelParams p;
    LinearizationSchedule schedule;
    SmoothedStats stats;
  };

  Eval eval(const Vec6& x) const {
    Eval e;
    e.p = base;
    unpack_means(e.p, x);
    e.schedule = build_linearization_schedule(e.p, series.varrho_tilde);
    e.stats = residual_stats(e.p, e.schedule, series, post);
    if (profile) set_covariances(e.p, e.stats);
    return e;
  }
  ModelParams at(const Vec6& x) const { return eval(x).p; }
  double value(const Vec6& x) const {
    try {
      const Eval e = eval(x);
      return expected_complete_loglik(e.p, e.stats);
    } catch (const InfeasibleLinearization&) {
      return -std::numeric_limits<double>::infinity();
    }
  }
  Vec6 gradient(const Vec6& x) const {
    const Eval e = eval(x);
    return gradient_from_stats(e.p, e.schedule, e.stats);
  }
};

void apply_mask(Vec6& g, const std::array<bool, 6>& free) {
  for (int i = 0; i < 6; ++i)
    if (!free[static_cast<std::size_t>(i)]) g[i] = 0.0;
}

// Central differences of the analytic gradient; one-sided next to the
// feasibility boundary.
Mat6 hessian(const Objective& obj, const Vec6& x, const Vec6& g0, const std::array<bool, 6>& free) {
  Mat6 H = Mat6::Zero();
  for (int j = 0; j < 6; ++j) {
    if (!free[static_cast<std::size_t>(j)]) continue;
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    Vec6 xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    Vec6 col;
    try {
      col = (obj.gradient(xp) - obj.gradient(xm)) / (2.0 * h);
    } catch (const InfeasibleLinearization&) {
      try {
        col = (g0 - obj.gradient(xm)) / h;
      } catch (const InfeasibleLinearization&) {
        col = (obj.gradient(xp) - g0) / h;
      }
    }
    H.col(j) = col;
  }
  H = symmetrize(H);
  for (int i = 0; i < 6; ++i) {
    if (free[static_cast<std::size_t>(i)]) continue;
    H.row(i).setZero();
    H.col(i).setZero();
  }
  return H;
}

struct NewtonOutcome {
  Vec6 x;
  bool stationary = false;
};

NewtonOutcome newton_means(const Objective& obj, Vec6 x, const std::array<bool, 6>& free,
                           const MStepOptions& opt, int T) {
  const double gtol = opt.grad_tol * (1.0 + T);
  for (int it = 0; it < opt.max_newton; ++it) {
    Vec6 g = obj.gradient(x);
    apply_mask(g, free);
    if (!g.allFinite()) throw NumericalError("non-finite gradient of the expected log-likelihood");
    if (g.lpNorm<Eigen::Infinity>() <= gtol) return {x, true};

    const Mat6 H = hessian(obj, x, g, free);
    if (!H.allFinite()) throw NumericalError("non-finite Hessian of the expected log-likelihood");
    std::vector<int> idx;
    for (int i = 0; i < 6; ++i)
      if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
    const int n = static_cast<int>(idx.size());
    Eigen::MatrixXd Hf(n, n);
    Eigen::VectorXd gf(n);
    for (int a = 0; a < n; ++a) {
      gf[a] = g[idx[static_cast<std::size_t>(a)]];
      for (int b = 0; b < n; ++b) Hf(a, b) = H(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hf);
    const Eigen::VectorXd lam = es.eigenvalues();
    const double scale = lam.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || lam.cwiseAbs().minCoeff() <= 1e-13 * scale)
      throw NumericalError("degenerate design: the M-step normal equations are singular");
    // Newton step on the concave part; negative curvature directions are
    // flipped so the step is always an ascent direction.
    Eigen::VectorXd pf = es.eigenvectors() *
                         (es.eigenvectors().transpose() * gf).cwiseQuotient(lam.cwiseAbs());
    Vec6 p = Vec6::Zero();
    for (int a = 0; a < n; ++a) p[idx[static_cast<std::size_t>(a)]] = pf[a];

    const double f0 = obj.value(x);
    const double slope = g.dot(p);
    double step = 1.0;
    bool accepted = false;
    Vec6 xn = x;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * p;
      const double fn = obj.value(xn);
      if (std::isfinite(fn) && fn >= f0 + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Close to the optimum the predicted gain drops below the rounding
      // level of Lambda; accept the full step if it shrinks the gradient.
      if (slope > 1e-10 * (1.0 + std::abs(f0))) return {x, false};
      xn = x + p;
      if (!std::isfinite(obj.value(xn))) return {x, false};
      Vec6 gn = obj.gradient(xn);
      apply_mask(gn, free);
      if (gn.lpNorm<Eigen::Infinity>() >= g.lpNorm<Eigen::Infinity>()) return {x, false};
      step = 1.0;
    }
    const double moved = (step * p).lpNorm<Eigen::Infinity>();
    x = xn;
    if (moved <= opt.param_tol * (1.0 + x.lpNorm<Eigen::Infinity>())) return {x, true};
  }
  return {x, false};
}

void set_covariances(ModelParams& p, const SmoothedStats& s) {
  const double T = s.T();
  Mat2 su = Mat2::Zero(), sv = Mat2::Zero();
  for (int i = 0; i < s.T(); ++i) {
    su += s.Euu[static_cast<std::size_t>(i)];
    sv += s.Evv[static_cast<std::size_t>(i)];
  }
  p.Sigma_u = symmetrize(Mat2(su / T));
  if (!p.Sigma_v.isZero(0.0)) p.Sigma_v = symmetrize(Mat2(sv / T));
  if (!p.Sigma0.isZero(0.0)) {
    const Vec2 delta = s.m0_mean - p.mu0;
    p.Sigma0 = symmetrize(Mat2(s.m0_var + delta * delta.transpose()));
  }
}

void update_covariances(ModelParams& p, const ObservedSeries& series,
                        const MultiplierPosterior& post) {
  const auto schedule = build_linearization_schedule(p, series.varrho_tilde);
  set_covariances(p, residual_stats(p, schedule, series, post));
}

Vec6 gradient_from_stats(const ModelParams& params, const LinearizationSchedule& schedule,
                         const SmoothedStats& s) {
  const Mat2 Wu = inverse_or_zero(params.Sigma_u);
  const Mat2 Wv = inverse_or_zero(params.Sigma_v);
  const Mat2 W0 = inverse_or_zero(params.Sigma0);

  Vec2 gk = Vec2::Zero(), gmu = Vec2::Zero(), gphi = Vec2::Zero(), vsum = Vec2::Zero();
  for (int t = 1; t <= s.T(); ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const Vec2& g = schedule.at(t).g;
    // E[u d'] and E[u] g' weighted by Sigma_u^{-1}; only diagonals enter.
    const Mat2 Eud = s.Edu(t).transpose();
    const Vec2 wd = (Wu * Eud).diagonal();
    const Vec2 wg = (Wu * s.u[i]).cwiseProduct(g);
    gk -= wd - wg;
    gmu -= wd;
    gphi -= static_cast<double>(t - 1) * wd;
    vsum += s.v[i];
  }
  gmu += W0 * (s.m0_mean - params.mu0);
  gphi += Wv * vsum;
  Vec6 out;
  out << gk, gmu, gphi;
  return out;
}

}  // namespace

MultiplierPosterior multiplier_posterior(const SmootherOutput& smoothed) {
  MultiplierPosterior post;
  const int T = smoothed.T();
  post.mean.reserve(static_cast<std::size_t>(T + 1));
  post.var.reserve(static_cast<std::size_t>(T + 1));
  post.lag.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t <= T; ++t) {
    const auto& P = smoothed.P[static_cast<std::size_t>(t)];
    post.mean.push_back(smoothed.multiplier(t));
    post.var.push_back(P.topLeftCorner<2, 2>());
    if (t > 0) post.lag.push_back(P.topRightCorner<2, 2>());
  }
  return post;
}

Mat2 SmoothedStats::Edu(int t) const {
  const auto i = static_cast<std::size_t>(t - 1);
  return d[i] * u[i].transpose() + Z[i];
}

SmoothedStats residual_stats(const ModelParams& params, const LinearizationSchedule& schedule,
                             const ObservedSeries& series, const MultiplierPosterior& post) {
  const int T = series.T();
  if (post.T() != T) throw DomainError("posterior length does not match the series");
  if (schedule.horizon() < T) throw DomainError("schedule shorter than the series");
  SmoothedStats s;
  s.post = post;
  const auto n = static_cast<std::size_t>(T);
  s.u.reserve(n);
  s.v.reserve(n);
  s.d.reserve(n);
  s.Euu.reserve(n);
  s.Evv.reserve(n);
  s.Z.reserve(n);
  for (int t = 1; t <= T; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const auto& lin = schedule.at(t);
    const Mat2 G = lin.G();
    const Mat2 D = (lin.g.array() * (lin.g.array() - 1.0)).matrix().asDiagonal();
    const Vec2& m_prev = post.mean[i];
    const Vec2& m_cur = post.mean[i + 1];
    const Mat2& V_prev = post.var[i];
    const Mat2& V_cur = post.var[i + 1];
    const Mat2& C = post.lag[i];  // Cov(m_t, m_{t-1})

    const Vec2 u = series.b_tilde[i] + m_cur - G * m_prev - G * params.k_tilde +
                   (G - Mat2::Identity()) * lin.varrho + lin.h;
    const Vec2 v = m_cur - m_prev - params.phi;
    const Vec2 d = D * (m_prev - mean_log_multiplier(params, t - 1));
    const Mat2 cov_u = V_cur - C * G - G * C.transpose() + G * V_prev * G;
    const Mat2 cov_v = V_cur + V_prev - C - C.transpose();

    s.u.push_back(u);
    s.v.push_back(v);
    s.d.push_back(d);
    s.Euu.push_back(symmetrize(Mat2(u * u.transpose() + cov_u)));
    s.Evv.push_back(symmetrize(Mat2(v * v.transpose() + cov_v)));
    s.Z.push_back(D * (C.transpose() - V_prev * G));
  }
  s.m0_mean = post.mean.front();
  s.m0_var = post.var.front();
  s.mT_mean = post.mean.back();
  return s;
}

SmoothedStats e_step(const ModelParams& params, const ObservedSeries& series) {
  const auto schedule = build_linearization_schedule(params, series.varrho_tilde);
  const auto filt = run_filter(params, schedule, series, Measure::Real);
  const auto post = multiplier_posterior(smooth(filt));
  return residual_stats(params, schedule, series, post);
}

double expected_complete_loglik(const ModelParams& params, const SmoothedStats& stats) {
  Mat2 su = Mat2::Zero(), sv = Mat2::Zero();
  for (int i = 0; i < stats.T(); ++i) {
    su += stats.Euu[static_cast<std::size_t>(i)];
    sv += stats.Evv[static_cast<std::size_t>(i)];
  }
  const Vec2 delta = stats.m0_mean - params.mu0;
  const Mat2 s0 = stats.m0_var + delta * delta.transpose();
  const double T = stats.T();
  return gaussian_block(params.Sigma_u, su, T, "Sigma_u") +
         gaussian_block(params.Sigma_v, sv, T, "Sigma_v") +
         gaussian_block(params.Sigma0, s0, 1.0, "Sigma0");
}

double expected_complete_loglik(const ModelParams& params, const ObservedSeries& series,
                                const MultiplierPosterior& post) {
  LinearizationSchedule schedule;
  try {
    schedule = build_linearization_schedule(params, series.varrho_tilde);
  } catch (const InfeasibleLinearization&) {
    return -std::numeric_limits<double>::infinity();
  }
  return expected_complete_loglik(params, residual_stats(params, schedule, series, post));
}

Vec6 expected_loglik_gradient(const ModelParams& params, const ObservedSeries& series,
                              const MultiplierPosterior& post) {
  const auto schedule = build_linearization_schedule(params, series.varrho_tilde);
  return gradient_from_stats(params, schedule, residual_stats(params, schedule, series, post));
}

MStepResult m_step(const ModelParams& current, const ObservedSeries& series,
                   const MultiplierPosterior& post, const MStepOptions& options) {
  current.validate();
  MStepResult res;
  const auto free = free_coordinates(current);
  ModelParams p = current;

  // Newton on the profile likelihood of the mean block.
  bool profiled = false;
  try {
    const Objective obj{series, post, current, true};
    const auto out = newton_means(obj, pack_means(current), free, options, series.T());
    p = obj.at(out.x);
    profiled = is_pd(p.Sigma_u) && (current.Sigma_v.isZero(0.0) || is_pd(p.Sigma_v)) &&
               (current.Sigma0.isZero(0.0) || is_pd(p.Sigma0));
    res.cycles = 1;
    res.converged = out.stationary && profiled;
  } catch (const DomainError&) {
    profiled = false;
  }

  // Singular covariance estimates have no profile likelihood; alternate the
  // two blocks instead and stop once a covariance loses definiteness.
  if (!profiled) {
    p = current;
    res.converged = false;
    for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
      const ModelParams before = p;
      const Objective obj{series, post, p};
      unpack_means(p, newton_means(obj, pack_means(p), free, options, series.T()).x);
      update_covariances(p, series, post);
      res.cycles = cycle + 1;
      if (!is_pd(p.Sigma_u) || (!current.Sigma_v.isZero(0.0) && !is_pd(p.Sigma_v)) ||
          (!current.Sigma0.isZero(0.0) && !is_pd(p.Sigma0)))
        break;
      const double scale = 1.0 + pack_means(p).lpNorm<Eigen::Infinity>();
      if (max_param_change(before, p) <= options.param_tol * scale) {
        res.converged = true;
        break;
      }
    }
  }

  if (!is_pd(p.Sigma_u)) res.warnings.push_back("estimated Sigma_u is singular");
  if (!current.Sigma_v.isZero(0.0) && !is_pd(p.Sigma_v))
    res.warnings.push_back("estimated Sigma_v is singular");
  if (!current.Sigma0.isZero(0.0) && !is_pd(p.Sigma0))
    res.warnings.push_back("estimated Sigma0 is singular");
  res.params = p;
  return res;
}

EmResult em_fit(const ObservedSeries& series, const ModelParams& init, const EmOptions& options) {
  series.validate();
  init.validate();
  if (options.max_iter < 0) throw DomainError("max_iter must be nonnegative");
  if (!(options.tol >= 0.0)) throw DomainError("tol must be nonnegative");

  EmResult res;
  const auto init_schedule = build_linearization_schedule(init, series.varrho_tilde);
  if (weak_payout_identification(init_schedule))
    res.trace.warnings.push_back(
        "all payout linearization factors are close to one; k_tilde is weakly identified");

  ModelParams p = init;
  ModelParams good = init;
  res.trace.termination = "max_iter";
  for (int iter = 0; iter < options.max_iter; ++iter) {
    try {
      const auto schedule = build_linearization_schedule(p, series.varrho_tilde);
      const auto filt = run_filter(p, schedule, series, Measure::Real);
      good = p;
      res.trace.final_loglik = filt.loglik;
      const auto post = multiplier_posterior(smooth(filt));

      EmIteration rec;
      rec.params = p;
      rec.loglik = filt.loglik;
      rec.lambda_old = expected_complete_loglik(p, series, post);
      const MStepResult ms = m_step(p, series, post, options.m_step);
      rec.lambda_new = expected_complete_loglik(ms.params, series, post);
      rec.max_change = max_param_change(p, ms.params);
      res.trace.iterations.push_back(rec);
      for (const auto& w : ms.warnings)
        if (std::find(res.trace.warnings.begin(), res.trace.warnings.end(), w) ==
            res.trace.warnings.end())
          res.trace.warnings.push_back(w);
      p = ms.params;
      if (rec.max_change < options.tol) {
        res.trace.termination = "converged";
        break;
      }
    } catch (const NumericalError& e) {
      res.trace.termination = "aborted";
      res.trace.diagnostic = e.what();
      p = good;
      break;
    } catch (const DomainError& e) {
      res.trace.termination = "aborted";
      res.trace.diagnostic = e.what();
      p = good;
      break;
    }
  }

  // Observed log-likelihood at the returned parameters.
  try {
    const auto schedule = build_linearization_schedule(p, series.varrho_tilde);
    res.trace.final_loglik = run_filter(p, schedule, series, Measure::Real).loglik;
  } catch (const Error& e) {
    if (res.trace.termination != "aborted") {
      res.trace.termination = "aborted";
      res.trace.diagnostic = e.what();
    }
    p = good;
  }
  res.params = p;
  return res;
}

ModelParams default_initial_params(const ObservedSeries& series, double r_tilde) {
  series.validate();
  ModelParams p;
  p.r_tilde = r_tilde;
  p.k_tilde = Vec2::Constant(r_tilde + 0.02);
  p.mu0 = Vec2::Zero();
  // varrho~_t drifts with the mean log multiplier, so its OLS slope in t
  // starts phi near the drift.
  const int T = series.T();
  p.phi = Vec2::Zero();
  if (T >= 2) {
    const double tbar = 0.5 * (T - 1);
    Vec2 rbar = Vec2::Zero();
    for (const auto& rho : series.varrho_tilde) rbar += rho;
    rbar /= T;
    Vec2 sxy = Vec2::Zero();
    double sxx = 0.0;
    for (int t = 0; t < T; ++t) {
      sxy += (t - tbar) * (series.varrho_tilde[static_cast<std::size_t>(t)] - rbar);
      sxx += (t - tbar) * (t - tbar);
    }
    p.phi = sxy / sxx;
  }
  p.Sigma_u = 0.01 * Mat2::Identity();
  p.Sigma_v = 0.01 * Mat2::Identity();
  p.Sigma0 = Mat2::Identity();
  for (int c = 0; c < 2; ++c) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 1; t <= T; ++t)
      worst = std::max(worst, series.varrho_tilde[static_cast<std::size_t>(t - 1)][c] - p.k_tilde[c] -
                                  (t - 1) * p.phi[c]);
    if (worst >= std::log(0.5)) p.mu0[c] = worst - std::log(0.5);
  }
  return p;
}

double max_param_change(const ModelParams& a, const ModelParams& b) {
  double m = 0.0;
  m = std::max(m, (a.k_tilde - b.k_tilde).lpNorm<Eigen::Infinity>());
  m = std::max(m, (a.mu0 - b.mu0).lpNorm<Eigen::Infinity>());
  m = std::max(m, (a.phi - b.phi).lpNorm<Eigen::Infinity>());
  m = std::max(m, (a.Sigma_u - b.Sigma_u).lpNorm<Eigen::Infinity>());
  m = std::max(m, (a.Sigma_v - b.Sigma_v).lpNorm<Eigen::Infinity>());
  m = std::max(m, (a.Sigma0 - b.Sigma0).lpNorm<Eigen::Infinity>());
  return m;
}

std::vector<Vec2> smoothed_market_values(const SmoothedStats& stats, const ObservedSeries& series) {
  const auto books = series.books();
  if (static_cast<int>(books.size()) != stats.T() + 1)
    throw DomainError("smoothed statistics do not match the series length");
  std::vector<Vec2> out;
  out.reserve(books.size());
  for (std::size_t t = 0; t < books.size(); ++t)
    out.push_back(stats.post.mean[t].array().exp().matrix().cwiseProduct(books[t]));
  return out;
}

bool weak_payout_identification(const LinearizationSchedule& schedule, double tol) {
  for (const auto& lin : schedule.periods())
    if ((lin.g.array() - 1.0).abs().maxCoeff() > tol) return false;
  return true;
}

}  // namespace pcm

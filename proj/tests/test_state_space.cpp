#include "doctest.h"
#include "pcm/oracle.hpp"
#include "support.hpp"

#include <numbers>

using namespace pcm;
using namespace pcm::testing;

namespace {

struct Instance {
  ModelParams p;
  std::vector<Vec2> varrho;
  LinearizationSchedule sched;
  ObservedSeries series;
};

Instance make_instance(std::uint64_t seed, int T, int H) {
  std::mt19937_64 rng(seed);
  Instance in;
  in.p = random_params(rng);
  in.varrho = random_varrho(rng, in.p, H);
  in.sched = build_linearization_schedule(in.p, in.varrho);
  in.series = simulate_series(in.p, in.varrho, T, seed + 1000);
  return in;
}

bool psd_leq(const Mat4& a, const Mat4& b, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(symmetrize(Mat4(b - a)), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

}  // namespace

TEST_CASE("filter initialization") {
  ModelParams p;
  auto s = init_filter(p);
  CHECK(s.z == Vec4::Zero());
  Mat4 expect = Mat4::Identity();
  CHECK(s.P == expect);
  p.mu0 = Vec2(1, -1);
  p.Sigma0.setZero();
  s = init_filter(p);
  CHECK(s.z == Vec4(1, -1, 1, -1));
  CHECK(s.P == Mat4::Zero());
}

TEST_CASE("prediction in the noiseless limit") {
  std::mt19937_64 rng(1);
  auto p = random_params(rng);
  p.Sigma0.setZero();
  p.Sigma_v.setZero();
  const int T = 6;
  const auto varrho = random_varrho(rng, p, T);
  const auto sched = build_linearization_schedule(p, varrho);
  const auto s = simulate_series(p, varrho, T, 3);
  const auto f = run_filter(p, sched, s, Measure::Real);
  for (int t = 1; t <= T; ++t) {
    const auto& pred = f.steps[static_cast<std::size_t>(t - 1)].pred;
    Vec4 expect;
    expect << mean_log_multiplier(p, t), mean_log_multiplier(p, t - 1);
    CHECK(max_abs_diff(pred.z, expect) < 1e-14);
  }
  // One step from z_{0|0} = (mu0, mu0).
  const auto pred = predict_step(init_filter(p), p, sched.at(1), intercept(p, sched.at(1), Measure::Real));
  CHECK(max_abs_diff(pred.z, Vec4(p.mu0[0] + p.phi[0], p.mu0[1] + p.phi[1], p.mu0[0], p.mu0[1])) < 1e-15);
}

TEST_CASE("correction step edge cases") {
  std::mt19937_64 rng(2);
  auto p = random_params(rng);
  const auto varrho = random_varrho(rng, p, 1);
  const auto sched = build_linearization_schedule(p, varrho);
  const auto& lin = sched.at(1);
  const Vec2 c = intercept(p, lin, Measure::Real);
  const auto pred = predict_step(init_filter(p), p, lin, c);
  const auto same = correct_step(pred, measurement_matrix(lin), pred.b);
  CHECK(same.filt.z == pred.z);

  auto q = p;
  q.Sigma_u *= 1e12;
  const auto pq = predict_step(init_filter(q), q, lin, c);
  const auto wide = correct_step(pq, measurement_matrix(lin), pq.b + Vec2(0.3, -0.2));
  CHECK(wide.gain.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(max_abs_diff(wide.filt.z, pq.z) <= 1e-6 * (1.0 + pq.z.cwiseAbs().maxCoeff()));
  CHECK(max_abs_diff(wide.filt.P, pq.P) <= 1e-6 * pq.P.cwiseAbs().maxCoeff());

  auto bad = pred;
  bad.S.setZero();
  CHECK_THROWS_AS(correct_step(bad, measurement_matrix(lin), pred.b), NumericalError);
  CHECK_THROWS_AS(correct_step(pred, measurement_matrix(lin), Vec2(std::nan(""), 0.0)), DomainError);
}

TEST_CASE("single-period likelihood is a bivariate normal density") {
  const auto in = make_instance(3, 1, 1);
  const auto f = run_filter(in.p, in.sched, in.series, Measure::Real);
  const auto& pr = f.steps[0].pred;
  const Vec2 r = in.series.b_tilde[0] - pr.b;
  const double dens = std::exp(-0.5 * r.dot(pr.S.inverse() * r)) /
                      (2.0 * std::numbers::pi * std::sqrt(pr.S.determinant()));
  CHECK(f.loglik == doctest::Approx(std::log(dens)).epsilon(1e-13));
}

TEST_CASE("second moments do not depend on the intercepts") {
  const auto in = make_instance(4, 12, 12);
  const auto a = run_filter(in.p, in.sched, in.series, Measure::Real);
  const auto b = run_filter(in.p, in.sched, in.series, Measure::RiskNeutral);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].pred.P == b.steps[i].pred.P);
    CHECK(a.steps[i].pred.S == b.steps[i].pred.S);
    CHECK(a.steps[i].gain == b.steps[i].gain);
    CHECK(a.steps[i].filt.P == b.steps[i].filt.P);
  }
  CHECK(a.steps[0].filt.z != b.steps[0].filt.z);
}

TEST_CASE("filter, smoother and forecast agree with direct conditioning") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const int T = 4 + static_cast<int>(seed % 3);
    const int H = T + 3;
    const auto in = make_instance(seed, T, H);
    const auto c = intercepts(in.p, in.sched, Measure::Real);
    const auto f = run_filter(in.p, in.sched, in.series.b_tilde, c);
    const auto s = smooth(f);
    const auto fc = forecast(f, in.p, in.sched, c, H);
    const auto o = conditioning_oracle(in.p, in.sched, in.series.b_tilde, c, H);

    for (int t = 0; t <= T; ++t) {
      CHECK(max_abs_diff(f.filtered(t).z, o.filt_z[static_cast<std::size_t>(t)]) < 1e-10);
      CHECK(max_abs_diff(f.filtered(t).P, o.filt_P[static_cast<std::size_t>(t)]) < 1e-10);
      CHECK(max_abs_diff(s.z[static_cast<std::size_t>(t)], o.smooth_z[static_cast<std::size_t>(t)]) < 1e-8);
      CHECK(max_abs_diff(s.P[static_cast<std::size_t>(t)], o.smooth_P[static_cast<std::size_t>(t)]) < 1e-8);
    }
    for (int t = 1; t <= T; ++t) {
      const auto i = static_cast<std::size_t>(t - 1);
      CHECK(max_abs_diff(f.steps[i].pred.z, o.pred_z[i]) < 1e-10);
      CHECK(max_abs_diff(f.steps[i].pred.P, o.pred_P[i]) < 1e-10);
      CHECK(max_abs_diff(f.steps[i].pred.b, o.pred_b[i]) < 1e-10);
      CHECK(max_abs_diff(f.steps[i].pred.S, o.pred_S[i]) < 1e-10);
      CHECK(max_abs_diff(s.cross[i], o.smooth_cross[i]) < 1e-8);
    }
    for (int k = 0; k < H - T; ++k) {
      const auto i = static_cast<std::size_t>(k);
      CHECK(max_abs_diff(fc[i].z, o.fc_z[i]) < 1e-8);
      CHECK(max_abs_diff(fc[i].P, o.fc_P[i]) < 1e-8);
      CHECK(max_abs_diff(fc[i].b, o.fc_b[i]) < 1e-8);
      CHECK(max_abs_diff(fc[i].S, o.fc_S[i]) < 1e-8);
    }
    CHECK(std::abs(f.loglik - o.loglik) < 1e-8);
  }
}

TEST_CASE("smoother base case and deterministic state") {
  const auto in = make_instance(21, 7, 7);
  const auto f = run_filter(in.p, in.sched, in.series, Measure::Real);
  const auto s = smooth(f);
  CHECK(s.z.back() == f.filtered(7).z);
  CHECK(s.P.back() == f.filtered(7).P);

  auto p = in.p;
  p.Sigma0.setZero();
  p.Sigma_v.setZero();
  const auto sched = build_linearization_schedule(p, in.varrho);
  const auto s0 = smooth(run_filter(p, sched, in.series, Measure::Real));
  for (int t = 0; t <= 7; ++t)
    CHECK(max_abs_diff(s0.multiplier(t), mean_log_multiplier(p, t)) < 1e-13);
}

TEST_CASE("information ordering of covariances") {
  const auto in = make_instance(22, 30, 30);
  const auto f = run_filter(in.p, in.sched, in.series, Measure::Real);
  const auto s = smooth(f);
  for (int t = 1; t <= 30; ++t) {
    const auto i = static_cast<std::size_t>(t);
    CHECK(psd_leq(f.filtered(t).P, f.steps[i - 1].pred.P, 1e-13));
    CHECK(psd_leq(s.P[i], f.filtered(t).P, 1e-13));
    CHECK(is_psd(s.P[i], 1e-10));
  }
}

TEST_CASE("forecast drift and noiseless covariance") {
  auto in = make_instance(23, 5, 9);
  const auto c = intercepts(in.p, in.sched, Measure::Real);
  const auto f = run_filter(in.p, in.sched, in.series.b_tilde, c);
  const auto fc = forecast(f, in.p, in.sched, c, 9);
  for (int k = 1; k <= 4; ++k) {
    const Vec2 expect = f.multiplier(5) + static_cast<double>(k) * in.p.phi;
    CHECK(max_abs_diff(Vec2(fc[static_cast<std::size_t>(k - 1)].z.head<2>()), expect) < 1e-14);
  }
  auto p = in.p;
  p.Sigma_v.setZero();
  const auto f0 = run_filter(p, in.sched, in.series.b_tilde, c);
  const auto fc0 = forecast(f0, p, in.sched, c, 6);
  const Mat4 A = transition_matrix();
  CHECK(fc0[0].P == symmetrize(Mat4(A * f0.filtered(5).P * A.transpose())));
  CHECK_THROWS_AS(forecast(f, in.p, in.sched, c, 5), DomainError);
  const auto lb = forecast_log_books(in.series, fc);
  CHECK(lb.size() == 10);
}

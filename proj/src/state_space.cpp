#include "pcm/state_space.hpp"

#include <cmath>
#include <numbers>

namespace pcm {

namespace {

constexpr double kMinInnovationRcond = 1e-14;

// Moore-Penrose inverse of a symmetric PSD 2x2 block.
Mat2 psd_pinv(const Mat2& m) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(symmetrize(m));
  const Vec2 ev = es.eigenvalues();
  const double cutoff = 1e-13 * std::max(1e-300, ev.cwiseAbs().maxCoeff());
  Vec2 inv = Vec2::Zero();
  for (int i = 0; i < 2; ++i)
    if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Mat24 measurement_matrix(const PeriodLinearization& lin) {
  Mat24 psi = Mat24::Zero();
  psi.leftCols<2>() = -Mat2::Identity();
  psi.rightCols<2>() = lin.G();
  return psi;
}

Mat4 transition_matrix() {
  Mat4 a = Mat4::Zero();
  a.topLeftCorner<2, 2>().setIdentity();
  a.bottomLeftCorner<2, 2>().setIdentity();
  return a;
}

Vec4 transition_intercept(const ModelParams& params) {
  Vec4 a = Vec4::Zero();
  a.head<2>() = params.phi;
  return a;
}

Mat4 state_noise(const ModelParams& params) {
  Mat4 q = Mat4::Zero();
  q.topLeftCorner<2, 2>() = params.Sigma_v;
  return q;
}

const FilterState& FilterOutput::filtered(int t) const {
  if (t < 0 || t > T()) throw DomainError("filter output does not cover period " + std::to_string(t));
  return t == 0 ? initial : steps[static_cast<std::size_t>(t - 1)].filt;
}

FilterState init_filter(const ModelParams& params) {
  FilterState s;
  s.z << params.mu0, params.mu0;
  s.P = Mat4::Zero();
  s.P.topLeftCorner<2, 2>() = params.Sigma0;
  s.P.bottomRightCorner<2, 2>() = params.Sigma0;
  return s;
}

Prediction predict_step(const FilterState& prev, const ModelParams& params,
                        const PeriodLinearization& lin, const Vec2& intercept) {
  const Mat4 A = transition_matrix();
  const Vec4 a = transition_intercept(params);
  const Mat24 psi = measurement_matrix(lin);
  Prediction p;
  p.z = A * prev.z + a;
  p.b = psi * a + intercept + psi * A * prev.z;
  p.P = symmetrize(Mat4(A * prev.P * A.transpose() + state_noise(params)));
  p.S = symmetrize(Mat2(psi * p.P * psi.transpose() + params.Sigma_u));
  return p;
}

FilterStep correct_step(const Prediction& pred, const Mat24& Psi, const Vec2& observation) {
  if (!observation.allFinite()) throw DomainError("non-finite observation");
  Eigen::LLT<Mat2> llt(pred.S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("innovation covariance is not positive definite");
  Eigen::SelfAdjointEigenSolver<Mat2> es(pred.S, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()[0] <= kMinInnovationRcond * es.eigenvalues()[1])
    throw NumericalError("innovation covariance is ill-conditioned");

  FilterStep step;
  step.pred = pred;
  // K = P Psi' S^{-1}, via the Cholesky factor of S.
  const Mat42 PPsiT = pred.P * Psi.transpose();
  step.gain = llt.solve(PPsiT.transpose()).transpose();
  const Vec2 innovation = observation - pred.b;
  step.filt.z = pred.z + step.gain * innovation;
  step.filt.P = symmetrize(Mat4(pred.P - step.gain * pred.S * step.gain.transpose()));

  const Mat2 L = llt.matrixL();
  const double log_det = 2.0 * (std::log(L(0, 0)) + std::log(L(1, 1)));
  const double quad = innovation.dot(llt.solve(innovation));
  step.loglik = -std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * quad;
  return step;
}

FilterOutput run_filter(const ModelParams& params, const LinearizationSchedule& schedule,
                        std::span<const Vec2> observations, std::span<const Vec2> intercepts) {
  const int T = static_cast<int>(observations.size());
  if (T < 1) throw DomainError("filter needs at least one observation");
  if (schedule.horizon() < T) throw DomainError("schedule shorter than the observation sample");
  if (static_cast<int>(intercepts.size()) < T) throw DomainError("too few intercepts");

  FilterOutput out;
  out.initial = init_filter(params);
  out.steps.reserve(static_cast<std::size_t>(T));
  const FilterState* prev = &out.initial;
  for (int t = 1; t <= T; ++t) {
    const auto& lin = schedule.at(t);
    const auto i = static_cast<std::size_t>(t - 1);
    const Prediction pred = predict_step(*prev, params, lin, intercepts[i]);
    out.steps.push_back(correct_step(pred, measurement_matrix(lin), observations[i]));
    out.loglik += out.steps.back().loglik;
    prev = &out.steps.back().filt;
  }
  return out;
}

FilterOutput run_filter(const ModelParams& params, const LinearizationSchedule& schedule,
                        const ObservedSeries& series, Measure measure) {
  return run_filter(params, schedule, series.b_tilde, intercepts(params, schedule, measure));
}

SmootherOutput smooth(const FilterOutput& filter) {
  const int T = filter.T();
  const auto n = static_cast<std::size_t>(T + 1);
  SmootherOutput out;
  out.z.resize(n);
  out.P.resize(n);
  out.gain.resize(n - 1);
  out.cross.resize(n - 1);

  out.z[n - 1] = filter.filtered(T).z;
  out.P[n - 1] = filter.filtered(T).P;
  for (int t = T - 1; t >= 0; --t) {
    const auto i = static_cast<std::size_t>(t);
    const FilterState& f = filter.filtered(t);
    const Prediction& next_pred = filter.steps[i].pred;  // z_{t+1|t}

    Mat4 S = Mat4::Zero();
    S.topRightCorner<2, 2>().setIdentity();
    S.bottomRightCorner<2, 2>() =
        f.P.bottomLeftCorner<2, 2>() * psd_pinv(f.P.topLeftCorner<2, 2>());

    out.gain[i] = S;
    out.z[i] = f.z + S * (out.z[i + 1] - next_pred.z);
    out.P[i] = symmetrize(Mat4(f.P - S * (next_pred.P - out.P[i + 1]) * S.transpose()));
    out.cross[i] = S * out.P[i + 1];
  }
  return out;
}

std::vector<ForecastStep> forecast(const FilterOutput& filter, const ModelParams& params,
                                   const LinearizationSchedule& schedule,
                                   std::span<const Vec2> intercepts, int H) {
  const int T = filter.T();
  if (H < T + 1) throw DomainError("forecast horizon must exceed the sample length");
  if (schedule.horizon() < H) throw DomainError("schedule does not cover the forecast horizon");
  if (static_cast<int>(intercepts.size()) < H) throw DomainError("too few intercepts for forecast");

  const Mat4 A = transition_matrix();
  const Vec4 a = transition_intercept(params);
  const Mat4 Q = state_noise(params);
  std::vector<ForecastStep> out;
  out.reserve(static_cast<std::size_t>(H - T));
  Vec4 z = filter.filtered(T).z;
  Mat4 P = filter.filtered(T).P;
  for (int t = T + 1; t <= H; ++t) {
    const Mat24 psi = measurement_matrix(schedule.at(t));
    z = A * z + a;
    P = symmetrize(Mat4(A * P * A.transpose() + Q));
    ForecastStep f;
    f.t = t;
    f.z = z;
    f.P = P;
    f.b = psi * z + intercepts[static_cast<std::size_t>(t - 1)];
    f.S = symmetrize(Mat2(psi * P * psi.transpose() + params.Sigma_u));
    out.push_back(f);
  }
  return out;
}

std::vector<Vec2> forecast_log_books(const ObservedSeries& series,
                                     std::span<const ForecastStep> forecasts) {
  auto lb = series.log_books();
  for (const auto& f : forecasts) lb.push_back(lb.back() + f.b);
  return lb;
}

}  // namespace pcm

#include "pcm/oracle.hpp"

#include <cmath>
#include <numbers>

namespace pcm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Joint {
  VectorXd mean;
  MatrixXd cov;
};

// Conditions on the first n_obs entries of `obs_idx` order.
Joint condition(const Joint& j, const std::vector<int>& obs_idx, const VectorXd& obs) {
  const auto n = static_cast<Eigen::Index>(obs_idx.size());
  if (n == 0) return j;
  const Eigen::Index d = j.mean.size();
  MatrixXd S_oo(n, n), S_yo(d, n);
  VectorXd mu_o(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    mu_o[a] = j.mean[obs_idx[static_cast<std::size_t>(a)]];
    S_yo.col(a) = j.cov.col(obs_idx[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < n; ++b)
      S_oo(a, b) = j.cov(obs_idx[static_cast<std::size_t>(a)], obs_idx[static_cast<std::size_t>(b)]);
  }
  Eigen::LLT<MatrixXd> llt(S_oo);
  if (llt.info() != Eigen::Success) throw NumericalError("oracle: observation covariance not positive definite");
  Joint out;
  out.mean = j.mean + S_yo * llt.solve(obs - mu_o);
  out.cov = j.cov - S_yo * llt.solve(S_yo.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

}  // namespace

OracleMoments conditioning_oracle(const ModelParams& params, const LinearizationSchedule& schedule,
                                  std::span<const Vec2> observations,
                                  std::span<const Vec2> intercepts, int H) {
  const int T = static_cast<int>(observations.size());
  if (T < 1 || T > kOracleMaxT) throw DomainError("conditioning oracle supports 1 <= T <= 8");
  if (H < T || H > kOracleMaxH) throw DomainError("conditioning oracle supports T <= H <= 16");
  if (schedule.horizon() < H || static_cast<int>(intercepts.size()) < H)
    throw DomainError("oracle inputs do not cover the horizon");

  // Latent draws X = (m_{-1}, m_0, v_1..v_H, u_1..u_H).
  const int nx = 4 + 4 * H;
  auto xv = [](int s) { return 4 + 2 * (s - 1); };
  auto xu = [H](int t) { return 4 + 2 * H + 2 * (t - 1); };
  MatrixXd Sx = MatrixXd::Zero(nx, nx);
  Sx.block<2, 2>(0, 0) = params.Sigma0;
  Sx.block<2, 2>(2, 2) = params.Sigma0;
  for (int s = 1; s <= H; ++s) {
    Sx.block<2, 2>(xv(s), xv(s)) = params.Sigma_v;
    Sx.block<2, 2>(xu(s), xu(s)) = params.Sigma_u;
  }

  // Y = (m_{-1}, m_0..m_H, b_1..b_H) = mu + L X.
  const int ny = 2 * (H + 2) + 2 * H;
  auto ym = [](int t) { return 2 * (t + 1); };
  auto yb = [H](int t) { return 2 * (H + 2) + 2 * (t - 1); };
  VectorXd mu = VectorXd::Zero(ny);
  MatrixXd L = MatrixXd::Zero(ny, nx);
  mu.segment<2>(ym(-1)) = params.mu0;
  L.block<2, 2>(ym(-1), 0).setIdentity();
  mu.segment<2>(ym(0)) = params.mu0;
  L.block<2, 2>(ym(0), 2).setIdentity();
  for (int t = 1; t <= H; ++t) {
    mu.segment<2>(ym(t)) = mu.segment<2>(ym(t - 1)) + params.phi;
    L.middleRows<2>(ym(t)) = L.middleRows<2>(ym(t - 1));
    L.block<2, 2>(ym(t), xv(t)) += Mat2::Identity();
    const Mat2 G = schedule.at(t).G();
    mu.segment<2>(yb(t)) = -mu.segment<2>(ym(t)) + G * mu.segment<2>(ym(t - 1)) +
                           intercepts[static_cast<std::size_t>(t - 1)];
    L.middleRows<2>(yb(t)) = -L.middleRows<2>(ym(t)) + G * L.middleRows<2>(ym(t - 1));
    L.block<2, 2>(yb(t), xu(t)) += Mat2::Identity();
  }
  const Joint prior{mu, L * Sx * L.transpose()};

  auto z_mean = [&](const Joint& j, int t) {
    Vec4 z;
    z << j.mean.segment<2>(ym(t)), j.mean.segment<2>(ym(t - 1));
    return z;
  };
  auto z_block = [&](const Joint& j, int t, int s) {
    const int it[2] = {ym(t), ym(t - 1)};
    const int is[2] = {ym(s), ym(s - 1)};
    Mat4 P;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) P.block<2, 2>(2 * a, 2 * b) = j.cov.block<2, 2>(it[a], is[b]);
    return P;
  };

  OracleMoments out;
  std::vector<int> obs_idx;
  VectorXd obs(0);
  Joint cur = prior;
  out.filt_z.push_back(z_mean(cur, 0));
  out.filt_P.push_back(z_block(cur, 0, 0));
  for (int t = 1; t <= T; ++t) {
    // cur is conditioned on b_1..b_{t-1}.
    out.pred_z.push_back(z_mean(cur, t));
    out.pred_P.push_back(z_block(cur, t, t));
    out.pred_b.push_back(cur.mean.segment<2>(yb(t)));
    out.pred_S.push_back(cur.cov.block<2, 2>(yb(t), yb(t)));
    obs_idx.push_back(yb(t));
    obs_idx.push_back(yb(t) + 1);
    obs.conservativeResize(obs.size() + 2);
    obs.tail<2>() = observations[static_cast<std::size_t>(t - 1)];
    cur = condition(prior, obs_idx, obs);
    out.filt_z.push_back(z_mean(cur, t));
    out.filt_P.push_back(z_block(cur, t, t));
  }
  for (int t = 0; t <= T; ++t) {
    out.smooth_z.push_back(z_mean(cur, t));
    out.smooth_P.push_back(z_block(cur, t, t));
    if (t < T) out.smooth_cross.push_back(z_block(cur, t, t + 1));
  }
  for (int t = T + 1; t <= H; ++t) {
    out.fc_z.push_back(z_mean(cur, t));
    out.fc_P.push_back(z_block(cur, t, t));
    out.fc_b.push_back(cur.mean.segment<2>(yb(t)));
    out.fc_S.push_back(cur.cov.block<2, 2>(yb(t), yb(t)));
  }

  // Marginal density of (b_1..b_T).
  const auto n = static_cast<Eigen::Index>(obs_idx.size());
  MatrixXd S(n, n);
  VectorXd r(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    r[a] = obs[a] - prior.mean[obs_idx[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < n; ++b)
      S(a, b) = prior.cov(obs_idx[static_cast<std::size_t>(a)], obs_idx[static_cast<std::size_t>(b)]);
  }
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("oracle: joint observation covariance not positive definite");
  const MatrixXd Lc = llt.matrixL();
  const double log_det = 2.0 * Lc.diagonal().array().log().sum();
  out.loglik = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det -
               0.5 * r.dot(llt.solve(r));
  return out;
}

}  // namespace pcm

#pragma once

#include "pcm/em.hpp"
#include "pcm/pricing.hpp"
#include "pcm/simulation.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace pcm::testing {

inline Mat2 random_spd(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n;
  Mat2 a;
  a << n(rng), n(rng), n(rng), n(rng);
  return scale * scale * (0.5 * a * a.transpose() + 0.3 * Mat2::Identity());
}

inline ModelParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ModelParams p;
  p.k_tilde = Vec2(0.03 + 0.05 * U(rng), 0.02 + 0.04 * U(rng));
  p.mu0 = Vec2(-0.3 + 0.6 * U(rng), -0.3 + 0.6 * U(rng));
  p.phi = Vec2(-0.01 + 0.02 * U(rng), -0.01 + 0.02 * U(rng));
  p.Sigma0 = random_spd(rng, 0.15);
  p.Sigma_u = random_spd(rng, 0.05);
  p.Sigma_v = random_spd(rng, 0.04);
  p.r_tilde = 0.005 + 0.02 * U(rng);
  return p;
}

/// varrho~_t giving exp(varphi_t) spread over [0.05, 0.4].
inline std::vector<Vec2> random_varrho(std::mt19937_64& rng, const ModelParams& p, int H) {
  std::uniform_real_distribution<double> U(std::log(0.05), std::log(0.4));
  std::vector<Vec2> out;
  for (int t = 1; t <= H; ++t) {
    const Vec2 varphi(U(rng), U(rng));
    out.push_back(varphi + p.k_tilde + mean_log_multiplier(p, t - 1));
  }
  return out;
}

/// One simulated path turned into an observed series of length T.
inline ObservedSeries simulate_series(const ModelParams& p, const std::vector<Vec2>& varrho, int T,
                                      std::uint64_t seed, Vec2 B0 = Vec2(100.0, 150.0)) {
  const auto sched = build_linearization_schedule(p, varrho);
  SimConfig cfg;
  cfg.horizon = T;
  cfg.seed = seed;
  const auto panel = simulate_panel(p, sched, prior_start(p, B0), cfg);
  ObservedSeries s;
  s.B0 = B0;
  for (int k = 1; k <= T; ++k) {
    s.b_tilde.push_back(panel.b(0, k));
    s.varrho_tilde.push_back(varrho[static_cast<std::size_t>(k - 1)]);
  }
  return s;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace pcm::testing

#include "pcm/simulation.hpp"

#include <cmath>
#include <random>

namespace pcm {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Factor F with F F' = S for symmetric PSD S (zero allowed).
Mat2 psd_factor(const Mat2& S) {
  if (S.isZero(0.0)) return Mat2::Zero();
  Eigen::SelfAdjointEigenSolver<Mat2> es(symmetrize(S));
  const Vec2 ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

}  // namespace

SplitMix64::SplitMix64(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(seed ^ mix64(stream + 0x9e3779b97f4a7c15ULL))) {}

SplitMix64::result_type SplitMix64::operator()() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

PanelStart prior_start(const ModelParams& params, const Vec2& B0) {
  if (!(B0.array() > 0.0).all()) throw DomainError("initial book values must be positive");
  return {0, B0.array().log().matrix(), params.mu0, params.Sigma0};
}

std::size_t SimulatedPanel::index(std::size_t path, int k) const {
  if (path >= n_paths) throw DomainError("path index out of range");
  if (terminal_only) {
    if (k != horizon) throw DomainError("terminal-only panel stores only the last period");
    return path;
  }
  if (k < 0 || k > horizon) throw DomainError("period offset out of range");
  return path * static_cast<std::size_t>(horizon + 1) + static_cast<std::size_t>(k);
}

SimulatedPanel simulate_panel(const ModelParams& params, const LinearizationSchedule& schedule,
                              const PanelStart& start, const SimConfig& config) {
  params.validate();
  if (config.n_paths < 1) throw DomainError("n_paths must be at least 1");
  if (config.horizon < 0) throw DomainError("horizon must be nonnegative");
  if (config.antithetic && config.n_paths % 2 != 0)
    throw DomainError("antithetic sampling needs an even number of paths");
  if (start.t0 < 0 || start.t0 + config.horizon > schedule.horizon())
    throw DomainError("schedule does not cover the simulation horizon");
  if (!is_psd(start.m_cov)) throw DomainError("start covariance must be PSD");

  SimulatedPanel panel;
  panel.t0 = start.t0;
  panel.horizon = config.horizon;
  panel.n_paths = config.n_paths;
  panel.antithetic = config.antithetic;
  panel.terminal_only = config.terminal_only;
  panel.has_asset = schedule.has_asset();

  const auto stored = static_cast<std::size_t>(panel.stored_periods()) * config.n_paths;
  panel.m_.resize(stored);
  panel.log_book_.resize(stored);
  panel.b_.resize(stored);
  if (panel.has_asset) {
    panel.asset_exact_.resize(stored);
    panel.asset_lin_.resize(stored);
  }

  const Mat2 F0 = psd_factor(start.m_cov);
  const Mat2 Fu = psd_factor(params.Sigma_u);
  const Mat2 Fv = psd_factor(params.Sigma_v);
  std::vector<Vec2> c;
  c.reserve(static_cast<std::size_t>(config.horizon));
  for (int k = 1; k <= config.horizon; ++k)
    c.push_back(intercept(params, schedule.at(start.t0 + k), config.measure));

  auto record = [&](std::size_t path, int k, const Vec2& m, const Vec2& lb, const Vec2& b) {
    if (config.terminal_only && k != config.horizon) return;
    const std::size_t i = panel.index(path, k);
    panel.m_[i] = m;
    panel.log_book_[i] = lb;
    panel.b_[i] = b;
    if (panel.has_asset) {
      const Vec2 V = m + lb;
      panel.asset_exact_[i] = exact_log_asset(V);
      panel.asset_lin_[i] = linearized_log_asset(schedule.asset_at(start.t0 + k), V);
    }
  };

  const std::size_t streams = config.antithetic ? config.n_paths / 2 : config.n_paths;
  const int per_stream = config.antithetic ? 2 : 1;
  for (std::size_t s = 0; s < streams; ++s) {
    SplitMix64 rng(config.seed, s);
    std::normal_distribution<double> normal;
    std::vector<double> z(static_cast<std::size_t>(2 + 4 * config.horizon));
    for (auto& x : z) x = normal(rng);
    for (int a = 0; a < per_stream; ++a) {
      const double sign = a == 0 ? 1.0 : -1.0;
      const std::size_t path = s * static_cast<std::size_t>(per_stream) + static_cast<std::size_t>(a);
      Vec2 m = start.m_mean + sign * F0 * Vec2(z[0], z[1]);
      Vec2 lb = start.log_book;
      record(path, 0, m, lb, Vec2::Zero());
      for (int k = 1; k <= config.horizon; ++k) {
        const auto o = static_cast<std::size_t>(2 + 4 * (k - 1));
        const Vec2 v = sign * Fv * Vec2(z[o], z[o + 1]);
        const Vec2 u = sign * Fu * Vec2(z[o + 2], z[o + 3]);
        const Vec2 m_prev = m;
        m = params.phi + m_prev + v;
        const Vec2 b = -m + schedule.at(start.t0 + k).G() * m_prev +
                       c[static_cast<std::size_t>(k - 1)] + u;
        lb += b;
        record(path, k, m, lb, b);
      }
    }
  }
  return panel;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

McEstimate mc_mean(std::span<const double> values, bool antithetic) {
  std::vector<double> x;
  if (antithetic) {
    if (values.size() % 2 != 0) throw DomainError("antithetic values must come in pairs");
    x.reserve(values.size() / 2);
    for (std::size_t i = 0; i < values.size(); i += 2) x.push_back(0.5 * (values[i] + values[i + 1]));
  } else {
    x.assign(values.begin(), values.end());
  }
  McEstimate e;
  e.n = values.size();
  const auto n = static_cast<double>(x.size());
  if (x.empty()) return e;
  e.estimate = pairwise_sum(x) / n;
  if (x.size() > 1) {
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - e.estimate) * (x[i] - e.estimate);
    e.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  }
  return e;
}

McEstimate mc_option_price(const SimulatedPanel& panel, double L, int tau, double r_tilde,
                           bool call) {
  if (!panel.has_asset) throw DomainError("panel carries no asset values");
  if (!(L >= 0.0)) throw DomainError("strike must be nonnegative");
  const double disc = std::exp(-tau * r_tilde);
  std::vector<double> payoff(panel.n_paths);
  for (std::size_t p = 0; p < panel.n_paths; ++p) {
    const double va = std::exp(panel.asset_linearized(p, panel.horizon));
    payoff[p] = disc * (call ? std::max(va - L, 0.0) : std::max(L - va, 0.0));
  }
  return mc_mean(payoff, panel.antithetic);
}

McEstimate mc_default_probability(const SimulatedPanel& panel, double L_bar) {
  if (!panel.has_asset) throw DomainError("panel carries no asset values");
  if (!(L_bar > 0.0)) throw DomainError("threshold must be positive");
  const double log_l = std::log(L_bar);
  std::vector<double> hit(panel.n_paths);
  for (std::size_t p = 0; p < panel.n_paths; ++p)
    hit[p] = panel.asset_linearized(p, panel.horizon) <= log_l ? 1.0 : 0.0;
  return mc_mean(hit, panel.antithetic);
}

LinearizationErrorReport linearization_error_report(const SimulatedPanel& panel) {
  if (!panel.has_asset) throw DomainError("panel carries no asset values");
  LinearizationErrorReport r;
  const int first = panel.terminal_only ? panel.horizon : 0;
  std::vector<double> all;
  for (int k = first; k <= panel.horizon; ++k) {
    std::vector<double> err(panel.n_paths);
    for (std::size_t p = 0; p < panel.n_paths; ++p)
      err[p] = std::abs(panel.asset_exact(p, k) - panel.asset_linearized(p, k));
    double mx = 0.0;
    for (double e : err) mx = std::max(mx, e);
    r.max_abs.push_back(mx);
    r.mean_abs.push_back(pairwise_sum(err) / static_cast<double>(err.size()));
    all.insert(all.end(), err.begin(), err.end());
  }
  for (double e : r.max_abs) r.overall_max = std::max(r.overall_max, e);
  r.overall_mean = pairwise_sum(all) / static_cast<double>(all.size());
  return r;
}

SyntheticCompany simulate_company(const ModelParams& params, std::span<const Vec2> varrho,
                                  const Vec2& B0, int T, std::uint64_t seed) {
  if (T < 1) throw DomainError("T must be at least 1");
  if (varrho.size() < static_cast<std::size_t>(T))
    throw DomainError("payout schedule covers fewer than T periods");
  const auto schedule = build_linearization_schedule(params, varrho.first(static_cast<std::size_t>(T)));
  SimConfig cfg;
  cfg.horizon = T;
  cfg.seed = seed;
  const auto panel = simulate_panel(params, schedule, prior_start(params, B0), cfg);
  SyntheticCompany c;
  for (int k = 0; k <= T; ++k) {
    c.books.push_back(k == 0 ? B0 : Vec2(panel.log_book(0, k).array().exp().matrix()));
    c.m.push_back(panel.m(0, k));
  }
  for (int k = 1; k <= T; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    c.payouts.push_back(varrho[i].array().exp().matrix().cwiseProduct(c.books[i]));
  }
  return c;
}

}  // namespace pcm

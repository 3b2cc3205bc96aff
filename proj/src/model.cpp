#include "pcm/model.hpp"

#include <cmath>
#include <sstream>

namespace pcm {

namespace {

void require_finite(const auto& m, const char* name) {
  if (!m.allFinite()) throw DomainError(std::string("non-finite entry in ") + name);
}

// ln(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

void ModelParams::validate() const {
  require_finite(k_tilde, "k_tilde");
  require_finite(mu0, "mu0");
  require_finite(phi, "phi");
  require_finite(Sigma0, "Sigma0");
  require_finite(Sigma_u, "Sigma_u");
  require_finite(Sigma_v, "Sigma_v");
  if (!std::isfinite(r_tilde)) throw DomainError("non-finite r_tilde");
  if (!is_psd(Sigma0)) throw DomainError("Sigma0 is not symmetric positive semidefinite");
  if (!is_psd(Sigma_u)) throw DomainError("Sigma_u is not symmetric positive semidefinite");
  if (!is_psd(Sigma_v)) throw DomainError("Sigma_v is not symmetric positive semidefinite");
}

std::vector<Vec2> ObservedSeries::log_books() const {
  std::vector<Vec2> out;
  out.reserve(b_tilde.size() + 1);
  out.push_back(B0.array().log().matrix());
  for (const auto& b : b_tilde) out.push_back(out.back() + b);
  return out;
}

std::vector<Vec2> ObservedSeries::books() const {
  auto lb = log_books();
  for (auto& v : lb) v = v.array().exp().matrix();
  return lb;
}

void ObservedSeries::validate() const {
  if (b_tilde.empty()) throw DomainError("observed series needs at least one period");
  if (b_tilde.size() != varrho_tilde.size())
    throw DomainError("b_tilde and varrho_tilde lengths differ");
  if (!(B0.array() > 0.0).all() || !B0.allFinite())
    throw DomainError("initial book values must be finite and strictly positive");
  for (std::size_t i = 0; i < b_tilde.size(); ++i) {
    if (!b_tilde[i].allFinite() || !varrho_tilde[i].allFinite())
      throw DomainError("non-finite observation at period " + std::to_string(i + 1));
  }
}

ObservedSeries derive_series(std::span<const Vec2> books, std::span<const Vec2> payouts) {
  if (books.size() < 2) throw DomainError("need at least two book-value rows (B_0 and B_1)");
  if (payouts.size() + 1 != books.size())
    throw DomainError("expected " + std::to_string(books.size() - 1) + " payout rows, got " +
                      std::to_string(payouts.size()));
  static constexpr const char* kComponent[2] = {"equity", "liability"};
  for (std::size_t t = 0; t < books.size(); ++t) {
    for (int c = 0; c < 2; ++c) {
      if (!(books[t][c] > 0.0) || !std::isfinite(books[t][c])) {
        std::ostringstream os;
        os << "book value B_" << t << " (" << kComponent[c] << ") must be strictly positive, got "
           << books[t][c];
        throw DomainError(os.str());
      }
    }
  }
  for (std::size_t t = 0; t < payouts.size(); ++t) {
    for (int c = 0; c < 2; ++c) {
      if (!(payouts[t][c] > 0.0) || !std::isfinite(payouts[t][c])) {
        std::ostringstream os;
        os << "payout p_" << t + 1 << " (" << kComponent[c] << ") must be strictly positive, got "
           << payouts[t][c];
        throw DomainError(os.str());
      }
    }
  }
  ObservedSeries s;
  s.B0 = books[0];
  s.b_tilde.reserve(payouts.size());
  s.varrho_tilde.reserve(payouts.size());
  for (std::size_t t = 1; t < books.size(); ++t) {
    const Vec2 log_prev = books[t - 1].array().log();
    s.b_tilde.push_back(books[t].array().log().matrix() - log_prev);
    s.varrho_tilde.push_back(payouts[t - 1].array().log().matrix() - log_prev);
  }
  return s;
}

Vec2 mean_log_multiplier(const ModelParams& params, int t) {
  if (t < 0) throw DomainError("period index must be nonnegative");
  return params.mu0 + static_cast<double>(t) * params.phi;
}

PeriodLinearization linearize_period(const Vec2& varphi, const Vec2& varrho, int period) {
  PeriodLinearization lin;
  lin.varrho = varrho;
  lin.varphi = varphi;
  for (int c = 0; c < 2; ++c) {
    const double x = varphi[c];
    if (!std::isfinite(x) || x >= 0.0) throw InfeasibleLinearization(period, c, std::exp(x));
    const double one_minus = -std::expm1(x);  // 1 - e^x, accurate near x = 0
    const double ex = std::exp(x);
    lin.g[c] = 1.0 / one_minus;
    lin.h[c] = -(x * ex / one_minus + std::log(one_minus));
    lin.mu[c] = x - std::log(one_minus);
  }
  return lin;
}

AssetLinearization asset_linearization(double mu_a) {
  if (!std::isfinite(mu_a)) throw DomainError("asset center must be finite");
  AssetLinearization a;
  a.mu_a = mu_a;
  const double log_g = softplus(mu_a);
  a.g_a = 1.0 + std::exp(mu_a);
  a.w_a = 1.0 / (1.0 + std::exp(mu_a));
  // g (ln g - mu) + mu rearranged as (g - 1)(ln g - mu) + ln g, where
  // ln g - mu = softplus(-mu); avoids cancellation at both tails.
  const double ex = std::exp(mu_a);
  a.h_a = (std::isinf(ex) ? 1.0 : ex * softplus(-mu_a)) + log_g;
  return a;
}

double linearized_log_asset(const AssetLinearization& lin, const Vec2& log_values) {
  return lin.weights().dot(log_values) + lin.w_a * lin.h_a;
}

double exact_log_asset(const Vec2& log_values) {
  const double hi = log_values.maxCoeff();
  const double lo = log_values.minCoeff();
  return hi + std::log1p(std::exp(lo - hi));
}

double asset_center(const ModelParams& params, const Vec2& log_book_t, int t) {
  const Vec2 m = mean_log_multiplier(params, t);
  return (m[0] - m[1]) + (log_book_t[0] - log_book_t[1]);
}

const PeriodLinearization& LinearizationSchedule::at(int t) const {
  if (t < 1 || t > horizon())
    throw DomainError("schedule does not cover period " + std::to_string(t) + " (horizon " +
                      std::to_string(horizon()) + ")");
  return periods_[static_cast<std::size_t>(t - 1)];
}

const AssetLinearization& LinearizationSchedule::asset_at(int t) const {
  if (asset_.empty()) throw DomainError("asset linearization has not been attached");
  if (t < 0 || t >= static_cast<int>(asset_.size()))
    throw DomainError("asset linearization does not cover period " + std::to_string(t));
  return asset_[static_cast<std::size_t>(t)];
}

void LinearizationSchedule::set_asset(std::vector<AssetLinearization> asset) {
  if (static_cast<int>(asset.size()) != horizon() + 1)
    throw DomainError("asset linearization must cover periods 0..H");
  asset_ = std::move(asset);
}

double LinearizationSchedule::max_exp_varphi() const {
  double m = 0.0;
  for (const auto& p : periods_) m = std::max(m, p.varphi.array().exp().maxCoeff());
  return m;
}

LinearizationSchedule build_linearization_schedule(const ModelParams& params,
                                                   std::span<const Vec2> varrho) {
  std::vector<PeriodLinearization> periods;
  periods.reserve(varrho.size());
  for (std::size_t i = 0; i < varrho.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const Vec2 varphi = varrho[i] - params.k_tilde - mean_log_multiplier(params, t - 1);
    periods.push_back(linearize_period(varphi, varrho[i], t));
  }
  return LinearizationSchedule(std::move(periods));
}

void attach_asset_linearization(LinearizationSchedule& schedule, const ModelParams& params,
                                std::span<const Vec2> log_books) {
  if (static_cast<int>(log_books.size()) != schedule.horizon() + 1)
    throw DomainError("need log books for periods 0..H to attach asset linearization");
  std::vector<AssetLinearization> asset;
  asset.reserve(log_books.size());
  for (std::size_t t = 0; t < log_books.size(); ++t)
    asset.push_back(asset_linearization(asset_center(params, log_books[t], static_cast<int>(t))));
  schedule.set_asset(std::move(asset));
}

Vec2 intercept(const ModelParams& params, const PeriodLinearization& lin, Measure measure) {
  const Vec2 payout_term = (lin.g.array() - 1.0).matrix().cwiseProduct(lin.varrho);
  if (measure == Measure::Real) return lin.g.cwiseProduct(params.k_tilde) - payout_term - lin.h;
  const Vec2 convexity = 0.5 * params.Sigma_u.diagonal().cwiseQuotient(lin.g);
  return params.r_tilde * lin.g - payout_term - lin.h - convexity;
}

std::vector<Vec2> intercepts(const ModelParams& params, const LinearizationSchedule& schedule,
                             Measure measure) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(schedule.horizon()));
  for (const auto& lin : schedule.periods()) out.push_back(intercept(params, lin, measure));
  return out;
}

}  // namespace pcm

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pcm {

// Every two-component quantity is ordered (equity, liability).
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat24 = Eigen::Matrix<double, 2, 4>;
using Mat42 = Eigen::Matrix<double, 4, 2>;

/// Probability measure a computation runs under.
enum class Measure { Real, RiskNeutral };

inline const char* to_string(Measure m) {
  return m == Measure::Real ? "real" : "risk-neutral";
}

/// Base of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: nonpositive books, malformed parameters, bad indices.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Singular or ill-conditioned linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Expected payout exceeds expected value in some period, so the
/// log-linearization has no expansion point.
class InfeasibleLinearization : public NumericalError {
 public:
  InfeasibleLinearization(int period, int component, double exp_varphi)
      : NumericalError("infeasible linearization at period " + std::to_string(period) +
                       ", component " + (component == 0 ? std::string("equity")
                                                        : std::string("liability")) +
                       ": exp(varphi) = " + std::to_string(exp_varphi) + " >= 1"),
        period_(period),
        component_(component) {}

  int period() const { return period_; }
  int component() const { return component_; }

 private:
  int period_;
  int component_;
};

/// A root-finding problem without a solution in its admissible range.
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

template <typename M>
M symmetrize(const M& m) {
  return (0.5 * (m + m.transpose())).eval();
}

inline Mat2 from_vech(double s11, double s21, double s22) {
  Mat2 m;
  m << s11, s21, s21, s22;
  return m;
}

inline Eigen::Vector3d vech(const Mat2& m) { return {m(0, 0), m(1, 0), m(1, 1)}; }

/// Symmetric positive semidefinite up to a relative tolerance.
template <typename M>
bool is_psd(const M& m, double rel_tol = 1e-12) {
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > rel_tol * (1.0 + m.cwiseAbs().maxCoeff()))
    return false;
  Eigen::SelfAdjointEigenSolver<M> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -rel_tol * (1.0 + m.cwiseAbs().maxCoeff());
}

template <typename M>
bool is_pd(const M& m) {
  if (!m.allFinite()) return false;
  Eigen::LLT<M> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

}  // namespace pcm

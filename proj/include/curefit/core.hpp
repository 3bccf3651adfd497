#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace curefit {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Newton solver knobs shared by both M-step maximizers.
struct SolverControl {
  double tol = 1e-8;
  int max_iter = 100;
  double divergence_bound = 1e3;
};

inline SolverControl logistic_defaults() { return {1e-8, 100, 1e3}; }

/// Latency tolerance applies to the score sup-norm divided by n.
inline SolverControl latency_defaults() { return {1e-7, 50, 1e3}; }

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes.
// ---------------------------------------------------------------------------

class CureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad column names, bad flags, inconsistent options.
class ConfigError : public CureError {
 public:
  using CureError::CureError;
};

/// Malformed or invalid observations.
class DataError : public CureError {
 public:
  using CureError::CureError;
};

class DimensionError : public CureError {
 public:
  using CureError::CureError;
};

class ConvergenceError : public CureError {
 public:
  using CureError::CureError;
};

class SeparationError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

class DegenerateRiskSetError : public CureError {
 public:
  DegenerateRiskSetError(double time, const std::string& msg) : CureError(msg), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class IdentifiabilityError : public CureError {
 public:
  using CureError::CureError;
};

/// An M-step failed inside the EM loop; carries the EM iteration.
class MStepError : public ConvergenceError {
 public:
  MStepError(int iteration, const std::string& msg)
      : ConvergenceError("EM iteration " + std::to_string(iteration) + ": " + msg),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class RankDeficiencyError : public CureError {
 public:
  RankDeficiencyError(double eigenvalue, const std::string& msg) : CureError(msg), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class BootstrapInstabilityError : public CureError {
 public:
  using CureError::CureError;
};

class StudyInstabilityError : public CureError {
 public:
  using CureError::CureError;
};

// ---------------------------------------------------------------------------
// Small numeric helpers.
// ---------------------------------------------------------------------------

/// Logistic function without overflow for large |x|.
template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  if (x > Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + e^x).
template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  if (x > Scalar(0)) return x + log1p(exp(-x));
  return log1p(exp(x));
}

template <typename Derived>
typename Derived::Scalar sup_norm(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) return typename Derived::Scalar(0);
  return v.cwiseAbs().maxCoeff();
}

}  // namespace curefit

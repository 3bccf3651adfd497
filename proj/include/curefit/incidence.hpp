#pragma once

#include "curefit/core.hpp"
#include "curefit/data_model.hpp"

#include <Eigen/Cholesky>

#include <limits>

namespace curefit {

/// Incidence coefficients and the susceptibility probabilities they imply.
template <typename Scalar>
struct LogisticState {
  Vec<Scalar> b;
  Vec<Scalar> p;
  int iterations = 0;
  Scalar grad_norm{};
};

/// Probability of being susceptible, exp(b'w) / (1 + exp(b'w)).
template <typename DerivedB, typename DerivedW>
typename DerivedB::Scalar incidence_prob(const Eigen::MatrixBase<DerivedB>& b, const Eigen::MatrixBase<DerivedW>& w) {
  if (b.size() != w.size()) throw DimensionError("incidence_prob: b and w differ in length");
  return logistic(b.dot(w));
}

template <typename Scalar>
Vec<Scalar> incidence_probs(const Vec<Scalar>& b, const BasicCureDataset<Scalar>& data) {
  if (b.size() != data.w_dim()) throw DimensionError("incidence coefficients do not match incidence design");
  const Vec<Scalar> eta = data.w() * b;
  return eta.unaryExpr([](Scalar x) { return logistic(x); });
}

namespace detail {

template <typename Scalar>
void check_weights(const Vec<Scalar>& gamma, Index n) {
  if (gamma.size() != n) throw DimensionError("weight vector length does not match dataset");
  for (Index i = 0; i < n; ++i)
    if (!(gamma(i) >= Scalar(0) && gamma(i) <= Scalar(1)))
      throw DataError("weight " + std::to_string(i) + " outside [0, 1]");
}

}  // namespace detail

/// Per-subject logistic score contributions, row i = (gamma_i - p_i) W_i.
template <typename Scalar>
Mat<Scalar> logistic_score_rows(const Vec<Scalar>& b, const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) {
  detail::check_weights(gamma, data.size());
  const Vec<Scalar> resid = gamma - incidence_probs(b, data);
  return data.w().array().colwise() * resid.array();
}

template <typename Scalar>
Vec<Scalar> logistic_score(const Vec<Scalar>& b, const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) {
  detail::check_weights(gamma, data.size());
  const Vec<Scalar> resid = gamma - incidence_probs(b, data);
  return data.w().transpose() * resid;
}

/// sum_i gamma_i b'W_i - log(1 + exp(b'W_i))
template <typename Scalar>
Scalar weighted_logistic_loglik(const Vec<Scalar>& b, const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) {
  const Vec<Scalar> eta = data.w() * b;
  Scalar ll(0);
  for (Index i = 0; i < eta.size(); ++i) ll += gamma(i) * eta(i) - softplus(eta(i));
  return ll;
}

/// Newton-Raphson with step-halving for the weighted logistic M-step.
///
/// Stops when the score sup-norm is at most `ctrl.tol`. Throws
/// SeparationError when a coefficient leaves `ctrl.divergence_bound` and
/// ConvergenceError when `ctrl.max_iter` is exhausted.
template <typename Scalar>
LogisticState<Scalar> fit_weighted_logistic(const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data,
                                            const Vec<Scalar>& init, const SolverControl& ctrl = logistic_defaults()) {
  detail::check_weights(gamma, data.size());
  if (init.size() != data.w_dim()) throw DimensionError("initial incidence coefficients have wrong length");
  if (!init.allFinite()) throw ConvergenceError("initial incidence coefficients are not finite");

  const auto& w = data.w();
  Vec<Scalar> b = init;
  Scalar ll = weighted_logistic_loglik(b, gamma, data);
  Vec<Scalar> p = incidence_probs(b, data);
  Vec<Scalar> score = w.transpose() * (gamma - p);

  for (int iter = 0;; ++iter) {
    const Scalar gnorm = sup_norm(score);
    if (gnorm <= Scalar(ctrl.tol)) return {b, p, iter, gnorm};
    if (iter >= ctrl.max_iter)
      throw ConvergenceError("weighted logistic fit did not converge in " + std::to_string(ctrl.max_iter) +
                             " iterations (score sup-norm " + std::to_string(static_cast<double>(gnorm)) + ")");

    const Vec<Scalar> v = (p.array() * (Scalar(1) - p.array())).matrix();
    const Mat<Scalar> info = w.transpose() * (w.array().colwise() * v.array()).matrix();
    const Eigen::LDLT<Mat<Scalar>> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw SeparationError("logistic information matrix is singular (separation or collinear covariates)");
    const Vec<Scalar> step = ldlt.solve(score);

    // Near the optimum the objective change falls below rounding; allow for it.
    using std::abs;
    const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + abs(ll));
    Scalar scale(1);
    Vec<Scalar> candidate = b + step;
    Scalar cand_ll = weighted_logistic_loglik(candidate, gamma, data);
    for (int h = 0; h < 30 && !(cand_ll >= ll - slack); ++h) {
      scale /= Scalar(2);
      candidate = b + scale * step;
      cand_ll = weighted_logistic_loglik(candidate, gamma, data);
    }
    if (!(cand_ll >= ll - slack))
      throw ConvergenceError("weighted logistic step-halving failed to increase the objective");
    b = candidate;
    ll = cand_ll;
    if (sup_norm(b) > Scalar(ctrl.divergence_bound))
      throw SeparationError("incidence coefficient exceeded " + std::to_string(ctrl.divergence_bound) +
                            " (likely separation)");
    p = incidence_probs(b, data);
    score = w.transpose() * (gamma - p);
  }
}

}  // namespace curefit

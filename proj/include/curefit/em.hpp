#pragma once

#include "curefit/core.hpp"
#include "curefit/data_model.hpp"
#include "curefit/incidence.hpp"
#include "curefit/latency.hpp"

#include <vector>

namespace curefit {

struct EmControl {
  double em_tol = 1e-7;
  int em_max_iter = 500;
  SolverControl logistic = logistic_defaults();
  SolverControl latency = latency_defaults();
  /// Censored subjects observed beyond the last event time get S = 0 in the
  /// E-step, i.e. are treated as cured.
  bool zero_tail = true;
  /// Starting weight for censored subjects.
  double init_censored_weight = 0.5;

  void validate() const {
    if (!(em_tol > 0)) throw ConfigError("em_tol must be positive");
    if (em_max_iter < 1) throw ConfigError("em_max_iter must be at least 1");
    if (!(init_censored_weight > 0 && init_censored_weight <= 1))
      throw ConfigError("init_censored_weight must lie in (0, 1]");
  }
};

template <typename Scalar>
struct CureFit {
  Vec<Scalar> b;
  Vec<Scalar> beta;
  BaselineHazard<Scalar> hazard;
  /// Weights the final M-step was solved against.
  Vec<Scalar> gamma;
  std::vector<Scalar> loglik_trace;
  std::vector<Scalar> change_trace;
  int iterations = 0;
  bool converged = false;
  bool zero_tail = true;

  Vec<Scalar> coefficients() const {
    Vec<Scalar> theta(b.size() + beta.size());
    theta << b, beta;
    return theta;
  }
};

/// Posterior susceptibility weights given current parameters.
///
/// gamma_i = 1 for events; otherwise p_i S_i / (1 - p_i + p_i S_i). With
/// `zero_tail`, S_i = 0 for censored subjects beyond the last jump time.
template <typename Scalar>
Vec<Scalar> e_step(const Vec<Scalar>& b, const Vec<Scalar>& beta, const BaselineHazard<Scalar>& hazard,
                   const BasicCureDataset<Scalar>& data, bool zero_tail = false) {
  const Index n = data.size();
  const Vec<Scalar> p = incidence_probs(b, data);
  const Scalar tail = hazard.last_jump_time();
  Vec<Scalar> gamma(n);
  for (Index i = 0; i < n; ++i) {
    if (data.event()(i) == 1) {
      gamma(i) = Scalar(1);
      continue;
    }
    Scalar s = conditional_survival(data.time()(i), data.z().row(i), beta, hazard);
    if (zero_tail && data.time()(i) > tail) s = Scalar(0);
    const Scalar num = p(i) * s;
    gamma(i) = num / (Scalar(1) - p(i) + num);
  }
  return gamma;
}

/// Observed-data log-likelihood with Lambda plugged in.
template <typename Scalar>
Scalar observed_loglik(const Vec<Scalar>& b, const Vec<Scalar>& beta, const BaselineHazard<Scalar>& hazard,
                       const BasicCureDataset<Scalar>& data, bool zero_tail = false) {
  using std::exp;
  using std::log;
  const Vec<Scalar> eta = data.w() * b;
  const Scalar tail = hazard.last_jump_time();
  Scalar ll(0);
  for (Index i = 0; i < data.size(); ++i) {
    const Scalar lin = data.z().row(i).dot(beta);
    const Scalar cum = hazard.cumulative_at(data.time()(i)) * exp(lin);
    const Scalar log_p = -softplus(-eta(i));
    const Scalar log_1mp = -softplus(eta(i));
    if (data.event()(i) == 1) {
      ll += log_p + log(hazard.jump_at(data.time()(i))) + lin - cum;
    } else if (zero_tail && data.time()(i) > tail) {
      ll += log_1mp;
    } else {
      // log(1 - p + p S) evaluated as log(e^{log(1-p)} + e^{log p - cum})
      const Scalar a = log_1mp, c = log_p - cum;
      const Scalar m = std::max(a, c);
      ll += m + log(exp(a - m) + exp(c - m));
    }
  }
  return ll;
}

/// EM fit of the mixture cure model.
///
/// Alternates the E-step with the two M-steps until the largest absolute
/// change in (b, beta) is at most `ctrl.em_tol`. Non-convergence is reported
/// through `converged == false`, not an exception.
template <typename Scalar>
CureFit<Scalar> fit(const BasicCureDataset<Scalar>& data, const EmControl& ctrl = {}) {
  using std::log;
  ctrl.validate();
  const Index n = data.size();
  const Index events = data.event_count();
  if (events == n)
    throw IdentifiabilityError("no censored observations: the cure fraction is not identifiable");
  if (n >= 2) {
    for (Index j = 0; j < data.z_dim(); ++j) {
      if (data.z().col(j).maxCoeff() == data.z().col(j).minCoeff()) {
        const std::string name =
            data.z_names().empty() ? "z" + std::to_string(j + 1) : data.z_names()[static_cast<std::size_t>(j)];
        throw DataError("latency covariate '" + name + "' is constant; its coefficient is not identifiable");
      }
    }
  }

  CureFit<Scalar> out;
  out.zero_tail = ctrl.zero_tail;
  Vec<Scalar> gamma(n);
  for (Index i = 0; i < n; ++i)
    gamma(i) = data.event()(i) == 1 ? Scalar(1) : Scalar(ctrl.init_censored_weight);

  const Scalar frac = Scalar(events) / Scalar(n);
  Vec<Scalar> b = Vec<Scalar>::Zero(data.w_dim());
  b(0) = log(frac / (Scalar(1) - frac));
  Vec<Scalar> beta = Vec<Scalar>::Zero(data.z_dim());

  for (int iter = 1; iter <= ctrl.em_max_iter; ++iter) {
    LogisticState<Scalar> inc;
    LatencyState<Scalar> lat;
    try {
      inc = fit_weighted_logistic(gamma, data, b, ctrl.logistic);
      lat = fit_latency(gamma, data, beta, ctrl.latency);
    } catch (const CureError& e) {
      throw MStepError(iter, e.what());
    }
    const Scalar change = std::max(sup_norm(Vec<Scalar>(inc.b - b)), sup_norm(Vec<Scalar>(lat.beta - beta)));
    b = inc.b;
    beta = lat.beta;

    out.change_trace.push_back(change);
    out.loglik_trace.push_back(observed_loglik(b, beta, lat.hazard, data, ctrl.zero_tail));
    out.b = b;
    out.beta = beta;
    out.hazard = lat.hazard;
    out.gamma = gamma;
    out.iterations = iter;

    gamma = e_step(b, beta, lat.hazard, data, ctrl.zero_tail);
    if (change <= Scalar(ctrl.em_tol)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace curefit

#pragma once

#include "curefit/core.hpp"
#include "curefit/data_model.hpp"
#include "curefit/incidence.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace curefit {

/// Risk denominators at or below this value are treated as empty risk sets.
inline constexpr double kRiskFloor = 1e-300;

/// Right-continuous step function for the susceptible baseline cumulative hazard.
template <typename Scalar>
struct BaselineHazard {
  Vec<Scalar> jump_times;  ///< distinct event times, ascending
  Vec<Scalar> jumps;       ///< increments at each jump time
  Vec<Scalar> cumulative;  ///< running sums of `jumps`

  /// Number of jump times <= t.
  Index count_at(Scalar t) const {
    const Scalar* begin = jump_times.data();
    return static_cast<Index>(std::upper_bound(begin, begin + jump_times.size(), t) - begin);
  }

  Scalar cumulative_at(Scalar t) const {
    const Index k = count_at(t);
    return k == 0 ? Scalar(0) : cumulative(k - 1);
  }

  /// Increment exactly at t (zero off the jump set).
  Scalar jump_at(Scalar t) const {
    const Index k = count_at(t);
    return (k > 0 && jump_times(k - 1) == t) ? jumps(k - 1) : Scalar(0);
  }

  Scalar last_jump_time() const {
    return jump_times.size() ? jump_times(jump_times.size() - 1) : Scalar(0);
  }
};

template <typename Scalar>
struct LatencyState {
  Vec<Scalar> beta;
  BaselineHazard<Scalar> hazard;
  Vec<Scalar> risk_scores;  ///< exp(beta'Z_i), original row order
  int iterations = 0;
};

namespace detail {

// Everything a latency evaluation needs at one (beta, gamma): weighted risk
// sums at each distinct event time, the Breslow jumps, and the running
// integrals of dLambda and zbar dLambda. Tied event times share one risk set.
template <typename Scalar>
struct RiskSetTable {
  Vec<Scalar> risk;          // exp(beta'Z_i)
  Vec<Scalar> linear;        // beta'Z_i
  std::vector<Scalar> times; // distinct event times
  std::vector<Index> deaths;
  Vec<Scalar> s0;
  Mat<Scalar> zbar;          // K x p, S1/S0
  Vec<Scalar> jumps;
  Vec<Scalar> cum_hazard;    // K
  Mat<Scalar> cum_zbar;      // K x p, sum_j<=k jump_j zbar_j
  std::vector<Index> last;   // per subject: index of the last jump time <= T_i, or -1

  RiskSetTable(const Vec<Scalar>& beta, const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) {
    const Index n = data.size();
    const Index p = data.z_dim();
    if (beta.size() != p) throw DimensionError("latency coefficients do not match latency design");
    check_weights(gamma, n);

    linear = data.z() * beta;
    risk = linear.array().exp().matrix();

    const auto& order = data.sort_index();
    const auto& t = data.time();
    const auto& ev = data.event();
    const auto& z = data.z();

    // Suffix sums over the time-sorted order.
    Vec<Scalar> suffix0(n + 1);
    Mat<Scalar> suffix1(n + 1, p);
    suffix0(n) = Scalar(0);
    suffix1.row(n).setZero();
    for (Index pos = n - 1; pos >= 0; --pos) {
      const Index i = order[static_cast<std::size_t>(pos)];
      const Scalar wr = gamma(i) * risk(i);
      suffix0(pos) = suffix0(pos + 1) + wr;
      suffix1.row(pos) = suffix1.row(pos + 1) + wr * z.row(i);
    }

    std::vector<Index> group_start;
    for (Index pos = 0; pos < n;) {
      Index end = pos;
      Index d = 0;
      while (end < n && t(order[static_cast<std::size_t>(end)]) == t(order[static_cast<std::size_t>(pos)])) {
        d += ev(order[static_cast<std::size_t>(end)]);
        ++end;
      }
      if (d > 0) {
        times.push_back(t(order[static_cast<std::size_t>(pos)]));
        deaths.push_back(d);
        group_start.push_back(pos);
      }
      pos = end;
    }

    const Index k_count = static_cast<Index>(times.size());
    s0.resize(k_count);
    zbar.resize(k_count, p);
    jumps.resize(k_count);
    cum_hazard.resize(k_count);
    cum_zbar.resize(k_count, p);
    Scalar running(0);
    Vec<Scalar> running_z = Vec<Scalar>::Zero(p);
    for (Index k = 0; k < k_count; ++k) {
      const Index pos = group_start[static_cast<std::size_t>(k)];
      s0(k) = suffix0(pos);
      if (!(s0(k) > Scalar(kRiskFloor)))
        throw DegenerateRiskSetError(static_cast<double>(times[static_cast<std::size_t>(k)]),
                                     "empty weighted risk set at event time " +
                                         std::to_string(static_cast<double>(times[static_cast<std::size_t>(k)])));
      zbar.row(k) = suffix1.row(pos) / s0(k);
      jumps(k) = Scalar(deaths[static_cast<std::size_t>(k)]) / s0(k);
      running += jumps(k);
      running_z += jumps(k) * zbar.row(k).transpose();
      cum_hazard(k) = running;
      cum_zbar.row(k) = running_z.transpose();
    }

    last.assign(static_cast<std::size_t>(n), -1);
    Index k = -1;
    for (Index pos = 0; pos < n; ++pos) {
      const Index i = order[static_cast<std::size_t>(pos)];
      while (k + 1 < k_count && times[static_cast<std::size_t>(k + 1)] <= t(i)) ++k;
      last[static_cast<std::size_t>(i)] = k;
    }
  }

  Scalar hazard_at_subject(Index i) const {
    const Index k = last[static_cast<std::size_t>(i)];
    return k < 0 ? Scalar(0) : cum_hazard(k);
  }

  BaselineHazard<Scalar> hazard() const {
    BaselineHazard<Scalar> h;
    h.jump_times = Eigen::Map<const Vec<Scalar>>(times.data(), static_cast<Index>(times.size()));
    h.jumps = jumps;
    h.cumulative = cum_hazard;
    return h;
  }

  Scalar loglik(const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) const {
    using std::log;
    Scalar ll(0);
    for (Index i = 0; i < data.size(); ++i) {
      if (gamma(i) == Scalar(0)) continue;
      Scalar term = -risk(i) * hazard_at_subject(i);
      if (data.event()(i) == 1) term += log(jumps(last[static_cast<std::size_t>(i)])) + linear(i);
      ll += gamma(i) * term;
    }
    return ll;
  }

  Mat<Scalar> score_rows(const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) const {
    const Index n = data.size();
    const Index p = data.z_dim();
    Mat<Scalar> rows = Mat<Scalar>::Zero(n, p);
    for (Index i = 0; i < n; ++i) {
      const Index k = last[static_cast<std::size_t>(i)];
      if (k < 0 || gamma(i) == Scalar(0)) continue;
      auto zi = data.z().row(i);
      Vec<Scalar> row = -risk(i) * (cum_hazard(k) * zi - cum_zbar.row(k)).transpose();
      if (data.event()(i) == 1) row += (zi - zbar.row(k)).transpose();
      rows.row(i) = gamma(i) * row.transpose();
    }
    return rows;
  }
};

}  // namespace detail

/// gamma-weighted Breslow estimator of the susceptible baseline cumulative hazard.
///
/// Jump at each distinct event time t_k: (number of events at t_k) divided by
/// sum_l gamma_l 1{t_k <= T_l} exp(beta'Z_l).
template <typename Scalar>
BaselineHazard<Scalar> breslow_hazard(const Vec<Scalar>& beta, const Vec<Scalar>& gamma,
                                      const BasicCureDataset<Scalar>& data) {
  return detail::RiskSetTable<Scalar>(beta, gamma, data).hazard();
}

/// S(t | z) = exp(-Lambda(t) exp(beta'z)) with Lambda right-continuous.
template <typename Scalar, typename DerivedZ>
Scalar conditional_survival(Scalar t, const Eigen::MatrixBase<DerivedZ>& z, const Vec<Scalar>& beta,
                            const BaselineHazard<Scalar>& hazard) {
  using std::exp;
  if (z.size() != beta.size()) throw DimensionError("conditional_survival: z and beta differ in length");
  return exp(-hazard.cumulative_at(t) * exp(beta.dot(z)));
}

template <typename Scalar, typename DerivedZ>
Scalar conditional_survival(Scalar t, const Eigen::MatrixBase<DerivedZ>& z, const LatencyState<Scalar>& state) {
  return conditional_survival(t, z, state.beta, state.hazard);
}

/// Profile log-likelihood of the latency part with Lambda re-profiled at `beta`:
/// sum_i gamma_i [delta_i (log dLambda(T_i) + beta'Z_i) - exp(beta'Z_i) Lambda(T_i)].
template <typename Scalar>
Scalar profile_loglik(const Vec<Scalar>& beta, const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) {
  return detail::RiskSetTable<Scalar>(beta, gamma, data).loglik(gamma, data);
}

/// Per-subject profile-likelihood score for beta (n x dim beta).
///
/// Row i: gamma_i { delta_i [Z_i - zbar(T_i)] - exp(beta'Z_i) int_0^{T_i} [Z_i - zbar(u)] dLambda(u) },
/// zbar = M1/M0 the gamma-weighted risk-set mean of Z.
template <typename Scalar>
Mat<Scalar> profile_score(const Vec<Scalar>& beta, const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data) {
  return detail::RiskSetTable<Scalar>(beta, gamma, data).score_rows(gamma, data);
}

/// The efficient score written with explicit empirical plug-ins:
///   M0(u) = n^-1 sum_l gamma_l Y_l(u) e^{beta'Z_l},  M1(u) = n^-1 sum_l gamma_l Y_l(u) Z_l e^{beta'Z_l},
///   dLambda(u) = (n^-1 sum_l dN_l(u)) / M0(u).
/// Evaluated by direct O(n^2) sums with no sorting or prefix sums, so it is an
/// independent route to `profile_score`.
template <typename Scalar>
Mat<Scalar> efficient_score_plugin(const Vec<Scalar>& beta, const Vec<Scalar>& gamma,
                                   const BasicCureDataset<Scalar>& data) {
  using std::exp;
  detail::check_weights(gamma, data.size());
  const Index n = data.size();
  const Index p = data.z_dim();
  const auto& t = data.time();
  const auto& z = data.z();
  const auto& ev = data.event();
  const Scalar inv_n = Scalar(1) / Scalar(n);

  auto m0 = [&](Scalar u) {
    Scalar s(0);
    for (Index l = 0; l < n; ++l)
      if (t(l) >= u) s += gamma(l) * exp(z.row(l).dot(beta));
    return s * inv_n;
  };
  auto m1 = [&](Scalar u) {
    Vec<Scalar> s = Vec<Scalar>::Zero(p);
    for (Index l = 0; l < n; ++l)
      if (t(l) >= u) s += gamma(l) * exp(z.row(l).dot(beta)) * z.row(l).transpose();
    return Vec<Scalar>(s * inv_n);
  };
  auto dn = [&](Scalar u) {
    Scalar s(0);
    for (Index l = 0; l < n; ++l)
      if (ev(l) == 1 && t(l) == u) s += Scalar(1);
    return s * inv_n;
  };

  std::vector<Scalar> support;
  for (Index l = 0; l < n; ++l)
    if (ev(l) == 1 && std::find(support.begin(), support.end(), t(l)) == support.end()) support.push_back(t(l));

  std::vector<Scalar> dlam(support.size());
  std::vector<Vec<Scalar>> ratio(support.size());
  for (std::size_t k = 0; k < support.size(); ++k) {
    const Scalar m0k = m0(support[k]);
    if (!(m0k > Scalar(kRiskFloor)))
      throw DegenerateRiskSetError(static_cast<double>(support[k]), "empty weighted risk set in plug-in score");
    dlam[k] = dn(support[k]) / m0k;
    ratio[k] = m1(support[k]) / m0k;
  }

  Mat<Scalar> rows(n, p);
  for (Index i = 0; i < n; ++i) {
    const Vec<Scalar> zi = z.row(i).transpose();
    Vec<Scalar> integral = Vec<Scalar>::Zero(p);
    for (std::size_t k = 0; k < support.size(); ++k)
      if (support[k] <= t(i)) integral += (zi - ratio[k]) * dlam[k];
    Vec<Scalar> row = -exp(zi.dot(beta)) * integral;
    if (ev(i) == 1) row += zi - m1(t(i)) / m0(t(i));
    rows.row(i) = gamma(i) * row.transpose();
  }
  return rows;
}

/// Newton M-step for beta with the baseline hazard profiled at every trial point.
///
/// The Hessian is assembled by central differences of the score column sums;
/// step-halving enforces ascent of `profile_loglik`. Converged when
/// sup-norm(score column sums) / n <= ctrl.tol.
template <typename Scalar>
LatencyState<Scalar> fit_latency(const Vec<Scalar>& gamma, const BasicCureDataset<Scalar>& data,
                                 const Vec<Scalar>& init, const SolverControl& ctrl = latency_defaults()) {
  using Table = detail::RiskSetTable<Scalar>;
  const Index p = data.z_dim();
  const Scalar n = Scalar(data.size());
  if (init.size() != p) throw DimensionError("initial latency coefficients have wrong length");
  if (!init.allFinite()) throw ConvergenceError("initial latency coefficients are not finite");

  auto score_sum = [&](const Vec<Scalar>& bt) {
    return Vec<Scalar>(Table(bt, gamma, data).score_rows(gamma, data).colwise().sum().transpose());
  };

  Vec<Scalar> beta = init;
  Table table(beta, gamma, data);
  Scalar ll = table.loglik(gamma, data);
  Vec<Scalar> score = table.score_rows(gamma, data).colwise().sum().transpose();

  // Factorization from the latest Newton step, reused for one finishing step
  // once the tolerance is met: Newton converges quadratically, so this buys
  // several digits for the price of a single profile evaluation.
  std::optional<Eigen::LDLT<Mat<Scalar>>> last_ldlt;

  for (int iter = 0;; ++iter) {
    const Scalar gnorm = sup_norm(score) / n;
    if (gnorm <= Scalar(ctrl.tol)) {
      if (last_ldlt && gnorm > Scalar(0)) {
        const Vec<Scalar> polished = beta + last_ldlt->solve(score);
        try {
          Table trial(polished, gamma, data);
          const Vec<Scalar> trial_score = trial.score_rows(gamma, data).colwise().sum().transpose();
          if (trial_score.allFinite() && sup_norm(trial_score) / n < gnorm)
            return {polished, trial.hazard(), trial.risk, iter};
        } catch (const DegenerateRiskSetError&) {
        }
      }
      return {beta, table.hazard(), table.risk, iter};
    }
    if (iter >= ctrl.max_iter)
      throw ConvergenceError("latency fit did not converge in " + std::to_string(ctrl.max_iter) +
                             " iterations (score sup-norm per subject " + std::to_string(static_cast<double>(gnorm)) +
                             ")");

    Mat<Scalar> hess(p, p);
    for (Index j = 0; j < p; ++j) {
      using std::abs;
      const Scalar h = Scalar(1e-5) * std::max(Scalar(1), abs(beta(j)));
      Vec<Scalar> up = beta, down = beta;
      up(j) += h;
      down(j) -= h;
      hess.col(j) = (score_sum(up) - score_sum(down)) / (Scalar(2) * h);
    }
    Mat<Scalar> neg = -(hess + hess.transpose()) / Scalar(2);

    Eigen::LDLT<Mat<Scalar>> ldlt(neg);
    Scalar ridge(0);
    while (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= Scalar(0)).any()) {
      ridge = ridge == Scalar(0) ? Scalar(1e-8) * (Scalar(1) + neg.diagonal().cwiseAbs().maxCoeff()) : ridge * 10;
      if (ridge > Scalar(1e12)) throw ConvergenceError("latency Hessian could not be regularized");
      ldlt.compute(neg + ridge * Mat<Scalar>::Identity(p, p));
    }
    const Vec<Scalar> step = ldlt.solve(score);
    last_ldlt = ldlt;

    Scalar scale(1);
    Vec<Scalar> candidate = beta + step;
    auto try_table = [&](const Vec<Scalar>& bt, Scalar& out_ll) -> bool {
      try {
        Table trial(bt, gamma, data);
        out_ll = trial.loglik(gamma, data);
        return std::isfinite(static_cast<double>(out_ll));
      } catch (const DegenerateRiskSetError&) {
        return false;
      }
    };
    using std::abs;
    const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + abs(ll));
    Scalar cand_ll;
    bool ok = try_table(candidate, cand_ll);
    for (int h = 0; h < 30 && !(ok && cand_ll >= ll - slack); ++h) {
      scale /= Scalar(2);
      candidate = beta + scale * step;
      ok = try_table(candidate, cand_ll);
    }
    if (!(ok && cand_ll >= ll - slack))
      throw ConvergenceError("latency step-halving failed to increase the profile likelihood");
    beta = candidate;
    if (sup_norm(beta) > Scalar(ctrl.divergence_bound))
      throw ConvergenceError("latency coefficient exceeded " + std::to_string(ctrl.divergence_bound));
    table = Table(beta, gamma, data);
    ll = table.loglik(gamma, data);
    score = table.score_rows(gamma, data).colwise().sum().transpose();
  }
}

}  // namespace curefit

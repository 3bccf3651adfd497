#pragma once

#include "curefit/core.hpp"
#include "curefit/data_model.hpp"
#include "curefit/em.hpp"
#include "curefit/incidence.hpp"
#include "curefit/latency.hpp"
#include "curefit/parallel.hpp"
#include "curefit/random.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace curefit {

enum class SeMethod { analytic, bootstrap };
enum class BlockMode { stacked, separate };

inline const char* to_string(SeMethod m) { return m == SeMethod::analytic ? "analytic" : "bootstrap"; }
inline const char* to_string(BlockMode m) { return m == BlockMode::stacked ? "stacked" : "separate"; }

/// Estimates, standard errors and Wald intervals for (b, beta), in that order.
template <typename Scalar>
struct InferenceReport {
  std::vector<std::string> names;
  Index incidence_dim = 0;
  Vec<Scalar> estimates;
  Vec<Scalar> se;
  Vec<Scalar> ci_low;
  Vec<Scalar> ci_high;
  /// n^-1 sum_i phi_i phi_i' for the analytic method; empty for bootstrap.
  Mat<Scalar> info_matrix;
  /// Covariance the SEs are read from.
  Mat<Scalar> covariance;
  /// Stacked per-subject scores (analytic method only).
  Mat<Scalar> scores;
  SeMethod method = SeMethod::analytic;
  BlockMode block_mode = BlockMode::stacked;
  Index n = 0;
  int boot_reps = 0;
  int boot_failed = 0;
};

/// 95% by default: estimate -/+ z_{(1+level)/2} se.
template <typename Scalar>
std::pair<Scalar, Scalar> wald_ci(Scalar estimate, Scalar se, double level = 0.95) {
  if (!(se >= Scalar(0))) throw ConfigError("wald_ci: standard error must be nonnegative");
  if (!(level > 0 && level < 1)) throw ConfigError("wald_ci: level must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2);
  return {estimate - Scalar(z) * se, estimate + Scalar(z) * se};
}

/// Row i = [logistic score contribution | survival score contribution] at the fit.
template <typename Scalar>
Mat<Scalar> stacked_scores(const CureFit<Scalar>& fit, const BasicCureDataset<Scalar>& data) {
  const Mat<Scalar> logistic_part = logistic_score_rows(fit.b, fit.gamma, data);
  const Mat<Scalar> survival_part = profile_score(fit.beta, fit.gamma, data);
  Mat<Scalar> out(data.size(), logistic_part.cols() + survival_part.cols());
  out << logistic_part, survival_part;
  return out;
}

namespace detail {

template <typename Scalar>
Mat<Scalar> checked_inverse(const Mat<Scalar>& info, const char* what) {
  if ((info - info.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * std::max(Scalar(1), info.cwiseAbs().maxCoeff()))
    throw RankDeficiencyError(0.0, std::string(what) + " information matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(info);
  if (eig.info() != Eigen::Success) throw RankDeficiencyError(0.0, std::string(what) + " eigen-decomposition failed");
  const Scalar lo = eig.eigenvalues().minCoeff();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  if (!(lo > Scalar(1e-12) * std::max(Scalar(1), hi)))
    throw RankDeficiencyError(static_cast<double>(lo), std::string(what) +
                                                           " information matrix is not positive definite (smallest "
                                                           "eigenvalue " +
                                                           std::to_string(static_cast<double>(lo)) + ")");
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

template <typename Scalar>
std::vector<std::string> parameter_names(const BasicCureDataset<Scalar>& data) {
  std::vector<std::string> names;
  for (Index j = 0; j < data.w_dim(); ++j)
    names.push_back(data.w_names().empty() ? (j == 0 ? "Intercept" : "w" + std::to_string(j))
                                           : data.w_names()[static_cast<std::size_t>(j)]);
  for (Index j = 0; j < data.z_dim(); ++j)
    names.push_back(data.z_names().empty() ? "z" + std::to_string(j + 1)
                                           : data.z_names()[static_cast<std::size_t>(j)]);
  return names;
}

template <typename Scalar>
void fill_intervals(InferenceReport<Scalar>& r) {
  r.ci_low.resize(r.se.size());
  r.ci_high.resize(r.se.size());
  for (Index j = 0; j < r.se.size(); ++j) {
    const auto [lo, hi] = wald_ci(r.estimates(j), r.se(j));
    r.ci_low(j) = lo;
    r.ci_high(j) = hi;
  }
}

}  // namespace detail

/// Standard errors from the empirical efficient information
/// I = n^-1 sum_i phi_i phi_i', se_j = sqrt([I^-1]_jj / n).
///
/// `separate` inverts the incidence and latency blocks on their own;
/// `stacked` inverts the full matrix, keeping the cross-block covariance.
template <typename Scalar>
InferenceReport<Scalar> analytic_se(const CureFit<Scalar>& fit, const BasicCureDataset<Scalar>& data,
                                    BlockMode block_mode = BlockMode::stacked) {
  const Index n = data.size();
  const Index q = data.w_dim();
  const Index p = data.z_dim();
  if (n <= q + p)
    throw DataError("analytic standard errors need more subjects (" + std::to_string(n) + ") than parameters (" +
                    std::to_string(q + p) + ")");

  InferenceReport<Scalar> r;
  r.names = detail::parameter_names(data);
  r.incidence_dim = q;
  r.estimates = fit.coefficients();
  r.scores = stacked_scores(fit, data);
  r.info_matrix = (r.scores.transpose() * r.scores) / Scalar(n);
  r.info_matrix = (r.info_matrix + r.info_matrix.transpose()) / Scalar(2);
  r.method = SeMethod::analytic;
  r.block_mode = block_mode;
  r.n = n;

  Mat<Scalar> inverse = Mat<Scalar>::Zero(q + p, q + p);
  if (block_mode == BlockMode::stacked) {
    inverse = detail::checked_inverse<Scalar>(r.info_matrix, "stacked");
  } else {
    inverse.topLeftCorner(q, q) = detail::checked_inverse<Scalar>(r.info_matrix.topLeftCorner(q, q), "incidence");
    inverse.bottomRightCorner(p, p) =
        detail::checked_inverse<Scalar>(r.info_matrix.bottomRightCorner(p, p), "latency");
  }
  r.covariance = inverse / Scalar(n);
  r.se = r.covariance.diagonal().cwiseSqrt();
  detail::fill_intervals(r);
  return r;
}

/// Bootstrap standard errors around an existing fit.
///
/// Replicate k resamples n subjects with the generator keyed by
/// (seed, stream_keys[k]); failed or non-convergent refits are dropped and
/// counted. More than 20% failures is an error.
template <typename Scalar>
InferenceReport<Scalar> bootstrap_se(const CureFit<Scalar>& fit, const BasicCureDataset<Scalar>& data,
                                     const EmControl& ctrl, std::uint64_t seed,
                                     std::span<const std::uint64_t> stream_keys, int threads = 0) {
  const std::size_t reps = stream_keys.size();
  if (reps < 2) throw ConfigError("bootstrap needs at least 2 replicates");
  const Index n = data.size();
  const Index dim = data.w_dim() + data.z_dim();

  std::vector<std::optional<Vec<Scalar>>> estimates(reps);
  parallel_for(reps, resolve_threads(threads), [&](std::size_t k) {
    auto rng = substream(seed, stream_keys[k], StreamPurpose::bootstrap);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = pick(rng);
    try {
      const auto resampled = data.subset(rows);
      const auto refit = curefit::fit(resampled, ctrl);
      if (refit.converged) estimates[k] = refit.coefficients();
    } catch (const CureError&) {
    }
  });

  std::vector<Vec<Scalar>> ok;
  for (const auto& e : estimates)
    if (e) ok.push_back(*e);
  const int failed = static_cast<int>(reps - ok.size());
  if (static_cast<double>(failed) > 0.2 * static_cast<double>(reps) || ok.size() < 2)
    throw BootstrapInstabilityError(std::to_string(failed) + " of " + std::to_string(reps) +
                                    " bootstrap replicates failed");

  Vec<Scalar> mean = Vec<Scalar>::Zero(dim);
  for (const auto& e : ok) mean += e;
  mean /= Scalar(ok.size());
  Mat<Scalar> cov = Mat<Scalar>::Zero(dim, dim);
  for (const auto& e : ok) cov += (e - mean) * (e - mean).transpose();
  cov /= Scalar(ok.size() - 1);

  InferenceReport<Scalar> r;
  r.names = detail::parameter_names(data);
  r.incidence_dim = data.w_dim();
  r.estimates = fit.coefficients();
  r.covariance = cov;
  r.se = cov.diagonal().cwiseSqrt();
  r.method = SeMethod::bootstrap;
  r.block_mode = BlockMode::stacked;
  r.n = n;
  r.boot_reps = static_cast<int>(reps);
  r.boot_failed = failed;
  detail::fill_intervals(r);
  return r;
}

template <typename Scalar>
InferenceReport<Scalar> bootstrap_se(const CureFit<Scalar>& fit, const BasicCureDataset<Scalar>& data,
                                     const EmControl& ctrl, int reps, std::uint64_t seed, int threads = 0) {
  if (reps < 2) throw ConfigError("bootstrap needs at least 2 replicates");
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(reps));
  for (std::size_t k = 0; k < keys.size(); ++k) keys[k] = k;
  return bootstrap_se(fit, data, ctrl, seed, std::span<const std::uint64_t>(keys), threads);
}

/// Fits the full data, then bootstraps.
template <typename Scalar>
InferenceReport<Scalar> bootstrap_se(const BasicCureDataset<Scalar>& data, const EmControl& ctrl, int reps,
                                     std::uint64_t seed, int threads = 0) {
  return bootstrap_se(curefit::fit(data, ctrl), data, ctrl, reps, seed, threads);
}

}  // namespace curefit

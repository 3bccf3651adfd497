#include "curefit/simulation.hpp"

#include "curefit/parallel.hpp"
#include "curefit/random.hpp"

#include <cmath>
#include <random>

namespace curefit {

void SimConfig::validate() const {
  if (n < 10) throw ConfigError("simulation sample size must be at least 10");
  if (reps < 1) throw ConfigError("simulation needs at least one replication");
  if (!(weibull_shape > 0) || !(weibull_scale > 0) || !(censor_max > 0))
    throw ConfigError("Weibull shape, scale and censor_max must be positive");
  if (b_true.size() != 3) throw ConfigError("b_true must have 3 entries (intercept, W1, W2)");
  if (beta_true.size() != 2) throw ConfigError("beta_true must have 2 entries (Z1, Z2)");
  if (se_method == SeMethod::bootstrap && boot_reps < 2) throw ConfigError("boot_reps must be at least 2");
  em.validate();
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"cure25", "cure50", "cure75"};
  return names;
}

SimConfig preset_config(const std::string& name) {
  SimConfig cfg;
  cfg.b_true.resize(3);
  cfg.beta_true.resize(2);
  cfg.beta_true << -1.0, 0.5;
  if (name == "cure25") {
    cfg.b_true << 2.1, -1.0, 0.3;
  } else if (name == "cure50") {
    cfg.b_true << 1.022, -1.0, 0.3;
  } else if (name == "cure75") {
    cfg.b_true << -0.1, -1.0, 0.3;
  } else {
    std::string list;
    for (const auto& p : preset_names()) list += (list.empty() ? "" : ", ") + p;
    throw ConfigError("unknown preset '" + name + "' (available: " + list + ")");
  }
  return cfg;
}

double weibull_ph_time(double survival, double linear_predictor, double shape, double scale) {
  return scale * std::pow(-std::log(survival) * std::exp(-linear_predictor), 1.0 / shape);
}

CureDataset generate_dataset(const SimConfig& cfg, std::uint64_t rep_index) {
  auto rng = substream(cfg.seed, rep_index, StreamPurpose::simulation);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Index n = cfg.n;
  Vec<double> time(n);
  Eigen::VectorXi event(n);
  Mat<double> w(n, 3), z(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double w1 = coin(rng) ? 1.0 : 0.0;
    const double w2 = gauss(rng);
    w.row(i) << 1.0, w1, w2;
    z.row(i) << w1, w2;
    const double p = logistic(cfg.b_true.dot(w.row(i).transpose()));
    const bool susceptible = unit(rng) < p;
    // 1 - u keeps the argument of log away from zero.
    const double u = 1.0 - unit(rng);
    const double c = cfg.censor_max * unit(rng);
    if (!susceptible) {
      time(i) = c;
      event(i) = 0;
      continue;
    }
    const double lin = cfg.beta_true.dot(z.row(i).transpose());
    const double failure = weibull_ph_time(u, lin, cfg.weibull_shape, cfg.weibull_scale);
    time(i) = std::min(failure, c);
    event(i) = failure <= c ? 1 : 0;
  }
  return CureDataset(std::move(time), std::move(event), std::move(w), std::move(z), {"Intercept", "W1", "W2"},
                     {"Z1", "Z2"});
}

ReplicationResult run_replication(const SimConfig& cfg, std::uint64_t rep_index, int inner_threads) {
  ReplicationResult out;
  try {
    const CureDataset data = generate_dataset(cfg, rep_index);
    const auto fitted = fit(data, cfg.em);
    if (!fitted.converged) {
      out.error = "EM did not converge";
      return out;
    }
    const auto report = cfg.se_method == SeMethod::analytic
                            ? analytic_se(fitted, data, cfg.block_mode)
                            : bootstrap_se(fitted, data, cfg.em, cfg.boot_reps,
                                           substream(cfg.seed, rep_index, StreamPurpose::bootstrap)(), inner_threads);
    out.estimates = report.estimates;
    out.se = report.se;
    out.ok = out.estimates.allFinite() && out.se.allFinite();
    if (!out.ok) out.error = "non-finite estimate or standard error";
  } catch (const CureError& e) {
    out.error = e.what();
  }
  return out;
}

SimulationSummary run_study(const SimConfig& cfg, int threads) {
  cfg.validate();
  const auto reps = static_cast<std::size_t>(cfg.reps);
  std::vector<ReplicationResult> results(reps);
  parallel_for(reps, resolve_threads(threads), [&](std::size_t r) { results[r] = run_replication(cfg, r, 1); });

  SimulationSummary s;
  const Index dim = cfg.b_true.size() + cfg.beta_true.size();
  Vec<double> truth(dim);
  truth << cfg.b_true, cfg.beta_true;
  const std::vector<std::string> labels{"b0", "b1", "b2", "beta1", "beta2"};

  std::vector<const ReplicationResult*> ok;
  for (std::size_t r = 0; r < reps; ++r) {
    if (results[r].ok) {
      ok.push_back(&results[r]);
    } else {
      s.failures.emplace_back(static_cast<int>(r), results[r].error);
    }
  }
  s.n_success = static_cast<int>(ok.size());
  s.n_fail = static_cast<int>(s.failures.size());
  if (ok.empty() || static_cast<double>(s.n_fail) > 0.1 * static_cast<double>(reps)) {
    std::string msg = std::to_string(s.n_fail) + " of " + std::to_string(reps) + " replications failed";
    if (!s.failures.empty()) msg += "; first failure (replication " + std::to_string(s.failures.front().first) +
                                    "): " + s.failures.front().second;
    throw StudyInstabilityError(msg);
  }

  const double m = static_cast<double>(ok.size());
  for (Index j = 0; j < dim; ++j) {
    ParameterSummary ps;
    ps.parameter = labels[static_cast<std::size_t>(j)];
    ps.truth = truth(j);
    double mean = 0, ese = 0, covered = 0;
    for (const auto* r : ok) {
      mean += r->estimates(j);
      ese += r->se(j);
      const auto [lo, hi] = wald_ci(r->estimates(j), r->se(j));
      if (lo <= truth(j) && truth(j) <= hi) covered += 1;
    }
    mean /= m;
    ps.bias = mean - truth(j);
    ps.ese = ese / m;
    ps.cp = covered / m;
    if (ok.size() >= 2) {
      double ss = 0;
      for (const auto* r : ok) ss += (r->estimates(j) - mean) * (r->estimates(j) - mean);
      ps.se = std::sqrt(ss / (m - 1));
    }
    s.parameters.push_back(ps);
  }
  return s;
}

}  // namespace curefit

#pragma once

#include "curefit/data_model.hpp"
#include "curefit/em.hpp"
#include "curefit/inference.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace curefit {

/// Monte Carlo design: Bernoulli(0.5) and N(0,1) covariates shared by both
/// parts, Weibull PH latency, Uniform(0, censor_max) censoring.
struct SimConfig {
  int n = 200;
  int reps = 1000;
  Vec<double> b_true;
  Vec<double> beta_true;
  double weibull_shape = 2.0;
  double weibull_scale = 1.0;
  double censor_max = 6.0;
  std::uint64_t seed = 1;
  SeMethod se_method = SeMethod::analytic;
  BlockMode block_mode = BlockMode::stacked;
  int boot_reps = 200;
  EmControl em;

  void validate() const;
};

/// Preset names accepted by `preset_config`.
const std::vector<std::string>& preset_names();

/// cure25 / cure50 / cure75: cure rate in the W1 = 1 arm at W2 = 0.
/// Throws ConfigError for unknown names.
SimConfig preset_config(const std::string& name);

/// Time at which a susceptible subject's survival S(t) = exp(-(t/scale)^shape e^lin)
/// equals `survival`.
double weibull_ph_time(double survival, double linear_predictor, double shape, double scale);

/// Dataset for replication `rep_index`; a pure function of (cfg, rep_index).
CureDataset generate_dataset(const SimConfig& cfg, std::uint64_t rep_index);

struct ParameterSummary {
  std::string parameter;
  double truth = 0;
  double bias = 0;
  /// Standard deviation of the estimates; absent with fewer than 2 successes.
  std::optional<double> se;
  double ese = 0;
  double cp = 0;
};

struct SimulationSummary {
  std::vector<ParameterSummary> parameters;
  int n_success = 0;
  int n_fail = 0;
  /// Replication indices that failed, with the reason.
  std::vector<std::pair<int, std::string>> failures;
};

/// Per-replication outcome, exposed for auditing.
struct ReplicationResult {
  bool ok = false;
  Vec<double> estimates;
  Vec<double> se;
  std::string error;
};

ReplicationResult run_replication(const SimConfig& cfg, std::uint64_t rep_index, int inner_threads = 1);

/// Runs every replication (in parallel when threads > 1) and aggregates in
/// replication order. More than 10% failed replications throws
/// StudyInstabilityError.
SimulationSummary run_study(const SimConfig& cfg, int threads = 0);

}  // namespace curefit

#include "curefit/cli.hpp"

#include "curefit/data_model.hpp"
#include "curefit/em.hpp"
#include "curefit/inference.hpp"
#include "curefit/report.hpp"
#include "curefit/simulation.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace curefit {

namespace {

struct FitOptions {
  std::string input;
  std::string time_column = "time";
  std::string event_column;
  std::vector<std::string> incidence;
  std::vector<std::string> latency;
  std::vector<std::string> center;
  SeMethod se = SeMethod::analytic;
  BlockMode block_mode = BlockMode::stacked;
  int boot_reps = 500;
  std::uint64_t seed = 1;
};

struct SimulateOptions {
  std::string preset = "cure50";
  int n = 200;
  int reps = 1000;
  std::uint64_t seed = 1;
  double shape = 2.0;
  double scale = 1.0;
  double censor_max = 6.0;
  std::vector<double> b;
  std::vector<double> beta;
  SeMethod se = SeMethod::analytic;
  BlockMode block_mode = BlockMode::stacked;
  int boot_reps = 200;
};

struct CommonOptions {
  std::string format = "text";
  std::string output;
  int threads = 0;
  double em_tol = 1e-7;
  int em_max_iter = 500;
  std::string zero_tail = "on";
  bool verbose = false;
};

const std::map<std::string, SeMethod> kSeMethods{{"analytic", SeMethod::analytic},
                                                 {"bootstrap", SeMethod::bootstrap}};
const std::map<std::string, BlockMode> kBlockModes{{"stacked", BlockMode::stacked},
                                                   {"separate", BlockMode::separate}};

void add_common(CLI::App& cmd, CommonOptions& c) {
  cmd.add_option("--format", c.format, "Output format")->check(CLI::IsMember({"text", "json"}));
  cmd.add_option("--output,-o", c.output, "Write the report here instead of stdout");
  cmd.add_option("--threads", c.threads, "Worker threads (default: CUREFIT_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--em-tol", c.em_tol, "EM convergence tolerance on max |change| of (b, beta)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--em-max-iter", c.em_max_iter, "Maximum EM iterations")->check(CLI::PositiveNumber);
  cmd.add_option("--zero-tail", c.zero_tail, "Treat censored subjects beyond the last event as cured")
      ->check(CLI::IsMember({"on", "off"}));
  cmd.add_flag("--verbose,-v", c.verbose, "Also report the other information block mode");
}

EmControl em_control(const CommonOptions& c) {
  EmControl ctrl;
  ctrl.em_tol = c.em_tol;
  ctrl.em_max_iter = c.em_max_iter;
  ctrl.zero_tail = c.zero_tail == "on";
  return ctrl;
}

void emit(const std::string& text, const CommonOptions& c, std::ostream& out) {
  if (c.output.empty()) {
    out << text;
    return;
  }
  std::ofstream file(c.output);
  if (!file) throw ConfigError("cannot write " + c.output);
  file << text;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const StudyInstabilityError*>(&e)) return kExitStudyInstability;
  if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const BootstrapInstabilityError*>(&e))
    return kExitNonConvergence;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const IdentifiabilityError*>(&e) || dynamic_cast<const DegenerateRiskSetError*>(&e))
    return kExitData;
  return kExitOther;
}

int cmd_fit(const FitOptions& f, const CommonOptions& c, bool boot_reps_given, std::ostream& out,
            std::ostream& err) {
  if (boot_reps_given && f.se != SeMethod::bootstrap)
    throw ConfigError("--boot-reps only applies with --se bootstrap");

  CovariateSpec spec{f.time_column, f.event_column, f.incidence, f.latency, f.center};
  const CureDataset data = load_csv(f.input, spec);
  const EmControl ctrl = em_control(c);
  const CureFit<double> fitted = fit(data, ctrl);

  InferenceReport<double> report;
  std::optional<InferenceReport<double>> alternate;
  if (f.se == SeMethod::analytic) {
    report = analytic_se(fitted, data, f.block_mode);
    if (c.verbose) {
      alternate = analytic_se(fitted, data,
                              f.block_mode == BlockMode::stacked ? BlockMode::separate : BlockMode::stacked);
    }
  } else {
    report = bootstrap_se(fitted, data, ctrl, f.boot_reps, f.seed, c.threads);
  }

  if (c.format == "json") {
    emit(fit_document(data, fitted, report, alternate).dump(2) + "\n", c, out);
  } else {
    std::string text = fit_text(fitted, report);
    if (alternate) text += "\nAlternate (" + std::string(to_string(alternate->block_mode)) + ") information:\n" +
                           fit_text(fitted, *alternate);
    emit(text, c, out);
  }
  if (!fitted.converged) {
    err << "warning: EM did not converge within " << ctrl.em_max_iter << " iterations\n";
    return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_simulate(const SimulateOptions& s, const CommonOptions& c, std::ostream& out) {
  SimConfig cfg = preset_config(s.preset);
  cfg.n = s.n;
  cfg.reps = s.reps;
  cfg.seed = s.seed;
  cfg.weibull_shape = s.shape;
  cfg.weibull_scale = s.scale;
  cfg.censor_max = s.censor_max;
  cfg.se_method = s.se;
  cfg.block_mode = s.block_mode;
  cfg.boot_reps = s.boot_reps;
  cfg.em = em_control(c);
  if (!s.b.empty()) cfg.b_true = Eigen::Map<const Vec<double>>(s.b.data(), static_cast<Index>(s.b.size()));
  if (!s.beta.empty())
    cfg.beta_true = Eigen::Map<const Vec<double>>(s.beta.data(), static_cast<Index>(s.beta.size()));

  const SimulationSummary summary = run_study(cfg, c.threads);
  if (c.format == "json") {
    Json doc = to_json(summary);
    doc["config"] = to_json(cfg);
    doc["config"]["preset"] = s.preset;
    emit(doc.dump(2) + "\n", c, out);
  } else {
    emit("Preset " + s.preset + ", n = " + std::to_string(cfg.n) + ", replications = " + std::to_string(cfg.reps) +
             "\n" + simulation_text(summary),
         c, out);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semiparametric Cox PH mixture cure model: EM fitting with analytic standard errors", "curefit"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);

  FitOptions fo;
  CommonOptions fit_common;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the model to a CSV file and report estimates, SEs and 95% CIs");
  fit_cmd->add_option("--input,-i", fo.input, "CSV file with a header row")->required();
  fit_cmd->add_option("--time", fo.time_column, "Follow-up time column")->required();
  fit_cmd->add_option("--event", fo.event_column, "Event indicator column (1 = event, 0 = censored)")->required();
  fit_cmd->add_option("--incidence", fo.incidence, "Incidence covariates (intercept is added)")
      ->delimiter(',')
      ->required();
  fit_cmd->add_option("--latency", fo.latency, "Latency covariates")->delimiter(',')->required();
  fit_cmd->add_option("--center", fo.center, "Columns to mean-center")->delimiter(',');
  fit_cmd->add_option("--se", fo.se, "Standard-error method")->transform(CLI::CheckedTransformer(kSeMethods));
  fit_cmd->add_option("--block-mode", fo.block_mode, "Information matrix inversion")
      ->transform(CLI::CheckedTransformer(kBlockModes));
  auto* boot_opt = fit_cmd->add_option("--boot-reps", fo.boot_reps, "Bootstrap replicates")->check(CLI::Range(2, 1000000));
  fit_cmd->add_option("--seed", fo.seed, "Bootstrap seed");
  add_common(*fit_cmd, fit_common);

  SimulateOptions so;
  CommonOptions sim_common;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the Monte Carlo study and report bias, SE, ESE and CP");
  sim_cmd->add_option("--preset", so.preset, "Cure-rate configuration")->check(CLI::IsMember(preset_names()));
  sim_cmd->add_option("--n", so.n, "Subjects per replication")->check(CLI::Range(10, 10000000));
  sim_cmd->add_option("--reps", so.reps, "Replications")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", so.seed, "Base seed");
  sim_cmd->add_option("--shape", so.shape, "Weibull shape")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--scale", so.scale, "Weibull scale")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--censor-max", so.censor_max, "Upper bound of uniform censoring")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--b", so.b, "Override incidence truth (3 values)")->delimiter(',')->expected(3);
  sim_cmd->add_option("--beta", so.beta, "Override latency truth (2 values)")->delimiter(',')->expected(2);
  sim_cmd->add_option("--se", so.se, "Standard-error method")->transform(CLI::CheckedTransformer(kSeMethods));
  sim_cmd->add_option("--block-mode", so.block_mode, "Information matrix inversion")
      ->transform(CLI::CheckedTransformer(kBlockModes));
  sim_cmd->add_option("--boot-reps", so.boot_reps, "Bootstrap replicates per replication")
      ->check(CLI::Range(2, 1000000));
  add_common(*sim_cmd, sim_common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fo, fit_common, boot_opt->count() > 0, out, err);
    return cmd_simulate(so, sim_common, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace curefit

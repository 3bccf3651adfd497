#include "curefit/report.hpp"

#include <cstdio>
#include <sstream>

namespace curefit {

namespace {

Json vector_json(const Vec<double>& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_json(const Mat<double>& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Json block_json(const InferenceReport<double>& r, Index begin, Index end) {
  Json out = Json::array();
  for (Index j = begin; j < end; ++j) {
    out.push_back({{"name", r.names[static_cast<std::size_t>(j)]},
                   {"estimate", r.estimates(j)},
                   {"se", r.se(j)},
                   {"ci_low", r.ci_low(j)},
                   {"ci_high", r.ci_high(j)}});
  }
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

void block_text(std::ostringstream& out, const std::string& title, const InferenceReport<double>& r, Index begin,
                Index end) {
  out << title << '\n';
  out << pad("Covariate", 14, true) << pad("Estimate", 10) << pad("SE", 10) << "   95% CI\n";
  for (Index j = begin; j < end; ++j) {
    out << pad(r.names[static_cast<std::size_t>(j)], 14, true) << pad(fixed4(r.estimates(j)), 10)
        << pad(fixed4(r.se(j)), 10) << "   (" << fixed4(r.ci_low(j)) << ", " << fixed4(r.ci_high(j)) << ")\n";
  }
}

}  // namespace

Json to_json(const InferenceReport<double>& r) {
  const Index q = r.incidence_dim;
  const Index dim = r.estimates.size();
  Json out{{"method", to_string(r.method)},
           {"block_mode", to_string(r.block_mode)},
           {"n", r.n},
           {"names", r.names},
           {"estimates", vector_json(r.estimates)},
           {"se", vector_json(r.se)},
           {"ci_low", vector_json(r.ci_low)},
           {"ci_high", vector_json(r.ci_high)},
           {"incidence", block_json(r, 0, q)},
           {"latency", block_json(r, q, dim)},
           {"info_matrix", matrix_json(r.info_matrix)},
           {"covariance", matrix_json(r.covariance)}};
  if (r.method == SeMethod::analytic) out["scores"] = matrix_json(r.scores);
  if (r.method == SeMethod::bootstrap) {
    out["boot_reps"] = r.boot_reps;
    out["boot_failed"] = r.boot_failed;
  }
  return out;
}

Json to_json(const CureFit<double>& fit) {
  Json trace_ll = Json::array(), trace_change = Json::array();
  for (double v : fit.loglik_trace) trace_ll.push_back(v);
  for (double v : fit.change_trace) trace_change.push_back(v);
  return {{"converged", fit.converged},
          {"iterations", fit.iterations},
          {"zero_tail", fit.zero_tail},
          {"b", vector_json(fit.b)},
          {"beta", vector_json(fit.beta)},
          {"loglik_trace", trace_ll},
          {"change_trace", trace_change},
          {"gamma", vector_json(fit.gamma)},
          {"baseline_hazard",
           {{"time", vector_json(fit.hazard.jump_times)},
            {"jump", vector_json(fit.hazard.jumps)},
            {"cumulative", vector_json(fit.hazard.cumulative)}}}};
}

Json fit_document(const CureDataset& data, const CureFit<double>& fit, const InferenceReport<double>& report,
                  const std::optional<InferenceReport<double>>& alternate) {
  Json doc{{"n", data.size()},
           {"events", data.event_count()},
           {"dropped_rows", data.dropped_rows},
           {"fit", to_json(fit)},
           {"inference", to_json(report)}};
  if (alternate) doc["alternate_block_mode"] = to_json(*alternate);
  return doc;
}

Json to_json(const SimulationSummary& s) {
  Json params = Json::array();
  for (const auto& p : s.parameters) {
    params.push_back({{"parameter", p.parameter},
                      {"truth", p.truth},
                      {"bias", p.bias},
                      {"se", p.se ? Json(*p.se) : Json(nullptr)},
                      {"ese", p.ese},
                      {"cp", p.cp},
                      {"n_success", s.n_success},
                      {"n_fail", s.n_fail}});
  }
  Json failures = Json::array();
  for (const auto& [rep, why] : s.failures) failures.push_back({{"replication", rep}, {"error", why}});
  return {{"parameters", params}, {"n_success", s.n_success}, {"n_fail", s.n_fail}, {"failures", failures}};
}

Json to_json(const SimConfig& cfg) {
  return {{"n", cfg.n},
          {"reps", cfg.reps},
          {"b_true", vector_json(cfg.b_true)},
          {"beta_true", vector_json(cfg.beta_true)},
          {"weibull_shape", cfg.weibull_shape},
          {"weibull_scale", cfg.weibull_scale},
          {"censor_max", cfg.censor_max},
          {"seed", cfg.seed},
          {"se_method", to_string(cfg.se_method)},
          {"block_mode", to_string(cfg.block_mode)},
          {"boot_reps", cfg.boot_reps},
          {"zero_tail", cfg.em.zero_tail}};
}

std::string fit_text(const CureFit<double>& fit, const InferenceReport<double>& r) {
  std::ostringstream out;
  block_text(out, "Logistic component (incidence)", r, 0, r.incidence_dim);
  out << '\n';
  block_text(out, "Cox PH component (latency)", r, r.incidence_dim, r.estimates.size());
  out << '\n'
      << "SE method: " << to_string(r.method);
  if (r.method == SeMethod::analytic) out << " (" << to_string(r.block_mode) << " information)";
  if (r.method == SeMethod::bootstrap) out << " (" << r.boot_reps << " replicates, " << r.boot_failed << " failed)";
  out << '\n'
      << "EM " << (fit.converged ? "converged" : "did NOT converge") << " after " << fit.iterations
      << " iterations; n = " << r.n << '\n';
  return out.str();
}

std::string simulation_text(const SimulationSummary& s) {
  std::ostringstream out;
  out << pad("Parameter", 10, true) << pad("True", 10) << pad("Bias", 10) << pad("SE", 10) << pad("ESE", 10)
      << pad("CP", 10) << '\n';
  for (const auto& p : s.parameters) {
    out << pad(p.parameter, 10, true) << pad(fixed4(p.truth), 10) << pad(fixed4(p.bias), 10)
        << pad(p.se ? fixed4(*p.se) : "NA", 10) << pad(fixed4(p.ese), 10) << pad(fixed4(p.cp), 10) << '\n';
  }
  out << "successful replications: " << s.n_success << ", failed: " << s.n_fail << '\n';
  return out.str();
}

}  // namespace curefit

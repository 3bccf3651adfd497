#pragma once

#include "curefit/em.hpp"
#include "curefit/inference.hpp"
#include "curefit/simulation.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace curefit {

using Json = nlohmann::json;

Json to_json(const InferenceReport<double>& report);
Json to_json(const CureFit<double>& fit);
Json to_json(const SimulationSummary& summary);
Json to_json(const SimConfig& cfg);

/// Full `fit` output: diagnostics, both coefficient blocks, the inference
/// report and the baseline hazard. `alternate` (optional) is the other
/// block mode, reported under "alternate_block_mode".
Json fit_document(const CureDataset& data, const CureFit<double>& fit, const InferenceReport<double>& report,
                  const std::optional<InferenceReport<double>>& alternate = std::nullopt);

/// Two tables (incidence, latency) with Estimate, SE and 95% CI at 4 decimals.
std::string fit_text(const CureFit<double>& fit, const InferenceReport<double>& report);

/// Bias / SE / ESE / CP table at 4 decimals.
std::string simulation_text(const SimulationSummary& summary);

}  // namespace curefit

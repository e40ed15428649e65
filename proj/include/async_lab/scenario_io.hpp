#pragma once

// JSON scenario files, bound reports and run reports.

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "async_lab/bounds.hpp"
#include "async_lab/sim.hpp"

namespace async_lab {

/// A design parameter given either as a number or as "lambda2", the
/// algebraic connectivity of the scenario graph.
struct DesignValue {
  double value = 0.0;
  bool lambda2 = false;
};

struct DesignSpec {
  DesignValue lambda;
  DesignValue mu;
};

/// Optional inputs of the bound computations that are not part of a run.
struct BoundInputs {
  std::optional<double> omega;
  std::optional<double> quant_level;
  std::optional<double> mu;
  std::optional<double> eps;
  std::optional<double> sigma_G;
  std::optional<double> sigma_K;
  std::optional<double> h;
  std::optional<double> tau;
  std::optional<double> tau_in;
  std::optional<double> delta_e;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> eta;
  std::optional<double> theta;
};

struct OutputSpec {
  std::string csv = "trace.csv";
  std::string events = "events.json";
  std::string report = "report.json";
};

struct ScenarioFile {
  std::string name;
  Scenario scenario;
  bool has_graph = false;
  bool has_model = false;
  std::optional<DesignSpec> design;  ///< exactly one of design / explicit gain
  std::optional<Matrix> explicit_P;
  BoundInputs bound;
  OutputSpec outputs;
};

/// Throws ScenarioError naming the offending key on any schema violation.
ScenarioFile parse_scenario(const nlohmann::json& j);
ScenarioFile load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioFile& f);

/// Resolves "lambda2" against the scenario graph.
double resolve(const DesignValue& v, const ScenarioFile& f);

/// Solves the design (if the file has one) and installs K and P into the
/// scenario. Throws DesignError on solver failure.
std::optional<GainDesign> resolve_gain(ScenarioFile& f);

/// Multiplicative ratio implied by the error model: ω, (q - 1)², the trigger ω,
/// or 0.
double implied_omega(const ErrorModel& m);

nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const GainDesign& d);
nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const Vector& v);
nlohmann::json error_model_json(const ErrorModel& m);
ErrorModel parse_error_model(const nlohmann::json& j);

}  // namespace async_lab

#include "async_lab/examples.hpp"

#include "async_lab/errors.hpp"

namespace async_lab {

using nlohmann::json;

namespace {

// The interaction topology is not given numerically; the 5-cycle is inferred
// from λ2 = 1.381966 and λn = 3.618034, which it reproduces exactly.
json five_cycle() { return {{"n", 5}, {"kind", "cycle"}}; }

json example1() {
  return {
      {"name", "example1_quantized_relative"},
      {"mode", "relative_edges"},
      {"model", {{"A", {{0.0, 1.0}, {-1.0, 0.0}}}, {"B", {{0.0}, {1.0}}}}},
      {"graph", five_cycle()},
      {"design", {{"lambda", "lambda2"}, {"mu", 1.0}}},
      {"schedule", {{"h_min", 0.005}, {"h_max", 0.012}, {"tau_max", 0.005}}},
      {"error_model", {{"kind", "log_quantizer"}, {"level", 1.1}}},
      {"x0", {{1.0, 0.0}, {-1.0, 0.5}, {2.0, -1.0}, {0.5, 1.5}, {-2.0, -1.0}}},
      {"horizon", 60.0},
      {"seed", 1},
      {"bound", {{"quant_level", 1.1}}},
  };
}

json example2() {
  return {
      {"name", "example2_broadcast_integrators"},
      {"mode", "broadcast"},
      {"model", {{"A", {{0.0}}}, {"B", {{1.0}}}}},
      {"graph", five_cycle()},
      {"gain", {{1.0}}},
      {"P", {{1.0}}},
      {"schedule", {{"h_min", 0.03}, {"h_max", 0.04}, {"tau_max", 0.029}}},
      {"error_model", {{"kind", "none"}}},
      {"x0", {1.0, -2.0, 3.0, 0.5, -1.0}},
      {"horizon", 20.0},
      {"seed", 1},
  };
}

json example3() {
  return {
      {"name", "example3_event_triggered_broadcast"},
      {"mode", "event_triggered"},
      {"model", {{"A", {{0.0}}}, {"B", {{1.0}}}}},
      {"graph", five_cycle()},
      {"design", {{"lambda", "lambda2"}, {"mu", "lambda2"}}},
      {"schedule", {{"h_min", 0.02}, {"h_max", 0.025}, {"tau_max", 0.02}}},
      {"error_model",
       {{"kind", "event_trigger"}, {"omega", 0.09}, {"dwell", 0.02}, {"cap", 0.08}, {"form", "capped"}}},
      {"x0", {1.0, -2.0, 3.0, 0.5, -1.0}},
      {"horizon", 20.0},
      {"seed", 1},
      {"bound",
       {{"h", 0.025}, {"tau", 0.02}, {"delta_e", 0.08}, {"alpha", 0.5}, {"gamma", 3.188}, {"eta", 1.6}}},
  };
}

}  // namespace

json builtin_example_json(int example) {
  switch (example) {
    case 1: return example1();
    case 2: return example2();
    case 3: return example3();
    default: throw ParameterError("no built-in example " + std::to_string(example));
  }
}

ScenarioFile builtin_example(int example) { return parse_scenario(builtin_example_json(example)); }

}  // namespace async_lab

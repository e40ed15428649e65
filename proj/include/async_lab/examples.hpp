#pragma once

// Built-in scenarios of the three reference experiments on the 5-cycle.

#include <json.hpp>

#include "async_lab/scenario_io.hpp"

namespace async_lab {

/// Scenario document of example 1 (quantised relative sampling of harmonic
/// oscillators), 2 (asynchronous broadcast, single integrators) or 3
/// (event-triggered broadcast with bounded error). Throws ParameterError for
/// any other number.
nlohmann::json builtin_example_json(int example);
ScenarioFile builtin_example(int example);

}  // namespace async_lab

#pragma once

#include <ostream>

#include <json.hpp>

#include "async_lab/sim.hpp"

namespace async_lab {

/// Columns t, x_1_1..x_n_N, delta_sq and, in edge modes, V.
void write_trace_csv(std::ostream& out, const Trace& trace, const Metrics& metrics);

/// Processed events, hold changes and per-window update counts.
nlohmann::json event_log_json(const Trace& trace, const Metrics& metrics);

}  // namespace async_lab

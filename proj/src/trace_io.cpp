#include "async_lab/trace_io.hpp"

#include <cmath>
#include <iomanip>

#include "async_lab/scenario_io.hpp"

namespace async_lab {

using nlohmann::json;

void write_trace_csv(std::ostream& out, const Trace& trace, const Metrics& metrics) {
  const bool edge = is_edge_mode(trace.mode);
  out << "t";
  for (int i = 1; i <= trace.agents; ++i)
    for (int k = 1; k <= trace.state_dim; ++k) out << ",x_" << i << '_' << k;
  out << ",delta_sq";
  if (edge) out << ",V";
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t j = 0; j < trace.times.size(); ++j) {
    out << trace.times[j];
    for (Eigen::Index c = 0; c < trace.states[j].size(); ++c) out << ',' << trace.states[j](c);
    out << ',' << metrics.delta_sq[j];
    if (edge) {
      out << ',';
      if (j < metrics.V.size()) out << metrics.V[j];
    }
    out << '\n';
  }
}

json event_log_json(const Trace& trace, const Metrics& metrics) {
  json events = json::array();
  for (const TraceEvent& e : trace.events) {
    events.push_back({{"t", e.time},
                      {"channel", e.channel},
                      {"kind", event_kind_name(e.kind)},
                      {"fired", e.fired}});
  }
  json holds = json::array();
  for (const HoldChange& h : trace.holds) {
    holds.push_back({{"t", h.time},
                     {"channel", h.channel},
                     {"sample_time", h.sample_time},
                     {"value", to_json(h.value)}});
  }
  json j;
  j["mode"] = mode_name(trace.mode);
  j["channels"] = trace.channels;
  j["events"] = std::move(events);
  j["holds"] = std::move(holds);
  j["window"] = metrics.window;
  j["update_counts"] = metrics.update_counts;
  return j;
}

}  // namespace async_lab

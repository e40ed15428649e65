#pragma once

// Event-driven simulation of agents coupled through asynchronously sampled,
// delayed and distorted zero-order holds.
//
// Between consecutive events every input is constant, so each agent advances
// exactly by the zero-order-hold discretisation of (A, B) over the interval.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "async_lab/design.hpp"
#include "async_lab/graphs.hpp"
#include "async_lab/sampling.hpp"

namespace async_lab {

/// Channel structure of a run:
///   abstract_coupled  channel i carries z_i, ż_i = A z_i - Σ_j g_ij K ẑ_j
///   relative_edges    channel p carries x_head - x_tail of edge p
///   broadcast         channel i carries x_i
///   event_triggered   broadcast channels updated by an event trigger
///   saturated         relative edges with ρ(ĥ)ĥ holds and input delay
enum class Mode { abstract_coupled, relative_edges, broadcast, event_triggered, saturated };

std::string mode_name(Mode m);
/// Throws ScenarioError on an unknown name.
Mode parse_mode(const std::string& name);
bool is_edge_mode(Mode m);
bool is_broadcast_mode(Mode m);

/// What a channel's controller uses before its first delivery.
enum class StartupHold { zero, first_sample };

struct Scenario {
  Mode mode = Mode::relative_edges;
  LtiModel model;
  Matrix gain;                          ///< K
  InteractionGraph graph;
  std::optional<Matrix> coupling;       ///< G (abstract mode)
  std::optional<ScheduleParams> schedule;
  std::vector<ChannelSchedule> schedules;  ///< explicit; overrides `schedule` when non-empty
  ErrorModel error_model = NoError{};
  std::optional<double> saturation;     ///< ρ_s
  double input_delay = 0.0;
  Vector x0;                            ///< stacked initial state
  double horizon = 0.0;
  std::uint64_t seed = 0;
  StartupHold startup = StartupHold::zero;
  std::optional<Matrix> lyapunov_P;     ///< P of V(t) = ½ zᵀ(I ⊗ P)z
  int grid_points = 1000;

  int agent_count() const;
  int channel_count() const;
  int state_dim() const { return model.state_dim(); }
  /// Throws ScenarioError (dimensions, mode requirements) or ParameterError.
  void validate() const;
};

enum class EventKind { deliver = 0, sample = 1, dwell_expire = 2, trigger_check = 3 };
std::string event_kind_name(EventKind k);

struct TraceEvent {
  double time = 0.0;
  int channel = 0;
  EventKind kind = EventKind::sample;
  bool fired = false;  ///< sample/trigger_check that produced an update
};

struct HoldChange {
  double time = 0.0;         ///< delivery instant
  int channel = 0;
  double sample_time = 0.0;  ///< instant the value was taken
  Vector value;              ///< hold as used by the controllers
};

struct Trace {
  Mode mode = Mode::relative_edges;
  int agents = 0;
  int state_dim = 0;
  int channels = 0;
  double horizon = 0.0;
  std::vector<double> times;          ///< strictly increasing
  std::vector<Vector> states;         ///< stacked x (or z) at each time
  /// Error-free channel value at the latest delivered sample instant, stacked
  /// per channel, and those instants; valid once every channel delivered.
  std::vector<Vector> channel_samples;
  std::vector<Vector> channel_sample_times;
  std::vector<bool> all_delivered;
  std::vector<TraceEvent> events;
  std::vector<HoldChange> holds;
  std::vector<ChannelSchedule> schedules;  ///< schedules used (empty for pure triggering)
};

/// Runs any scenario; event-triggered error models dispatch to
/// run_event_triggered.
Trace run(const Scenario& s);
Trace run_event_triggered(const Scenario& s);

/// Hard cap on processed events.
inline constexpr std::size_t kMaxEvents = 10'000'000;

struct Metrics {
  std::vector<double> t;
  std::vector<double> delta_sq;        ///< δᵀδ
  std::vector<double> V;               ///< edge modes with P only
  std::vector<double> delta_tilde_sq;  ///< broadcast modes, NaN until all channels delivered
  double window = 0.1;
  std::vector<int> update_counts;      ///< deliveries per window
  double delta0_sq = 0.0;
  double final_delta_sq = 0.0;
  double consensus_tol = 0.0;
  bool consensus = false;
  double average_drift = 0.0;          ///< max ‖Σx - e^{At}Σx(0)‖ / max(1, ‖e^{At}Σx(0)‖)
  double min_update_gap = 0.0;         ///< smallest gap between deliveries of one channel
  std::vector<std::string> warnings;
};

/// δ = x - 1 ⊗ (1/n) e^{At} Σ x_i(0) (δ = z in abstract mode). The consensus
/// flag requires δᵀδ < tol over the trailing unit of time; tol defaults to
/// 1e-8 (1 + δ(0)ᵀδ(0)).
Metrics compute_metrics(const Trace& trace, const Scenario& s,
                        std::optional<double> consensus_tol = std::nullopt);

/// δᵀδ at one stacked state.
double consensus_error_sq(const Matrix& a, const Vector& x, const Vector& x0, int agents,
                          double t);

}  // namespace async_lab

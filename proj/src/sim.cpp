#include "async_lab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>
#include <variant>

#include "async_lab/errors.hpp"

namespace async_lab {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::abstract_coupled: return "abstract_coupled";
    case Mode::relative_edges: return "relative_edges";
    case Mode::broadcast: return "broadcast";
    case Mode::event_triggered: return "event_triggered";
    case Mode::saturated: return "saturated";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::abstract_coupled, Mode::relative_edges, Mode::broadcast,
                 Mode::event_triggered, Mode::saturated}) {
    if (mode_name(m) == name) return m;
  }
  throw ScenarioError("unknown mode '" + name + "'");
}

bool is_edge_mode(Mode m) { return m == Mode::relative_edges || m == Mode::saturated; }
bool is_broadcast_mode(Mode m) { return m == Mode::broadcast || m == Mode::event_triggered; }

std::string event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::deliver: return "deliver";
    case EventKind::sample: return "sample";
    case EventKind::dwell_expire: return "dwell_expire";
    case EventKind::trigger_check: return "trigger_check";
  }
  return "unknown";
}

int Scenario::agent_count() const {
  if (mode == Mode::abstract_coupled) return coupling ? static_cast<int>(coupling->rows()) : 0;
  return graph.vertex_count();
}

int Scenario::channel_count() const {
  if (is_edge_mode(mode)) return graph.edge_count();
  return agent_count();
}

void Scenario::validate() const {
  model.validate();
  const int n_state = model.state_dim();
  if (mode == Mode::abstract_coupled) {
    if (!coupling) throw ScenarioError("abstract_coupled mode needs a coupling matrix G");
    if (coupling->rows() != coupling->cols() || coupling->rows() < 1) {
      throw ScenarioError("coupling matrix G must be square and non-empty");
    }
    require_finite(*coupling, "coupling");
    if (gain.rows() != n_state || gain.cols() != n_state) {
      throw ScenarioError("abstract_coupled mode needs an N x N gain K");
    }
  } else {
    if (graph.vertex_count() < 1) throw ScenarioError("scenario graph is empty");
    if (gain.rows() != model.input_dim() || gain.cols() != n_state) {
      throw ScenarioError("gain K must be " + std::to_string(model.input_dim()) + " x " +
                          std::to_string(n_state));
    }
    if (is_edge_mode(mode) && !is_connected(graph)) {
      throw ScenarioError(mode_name(mode) + " mode needs a connected graph");
    }
  }
  require_finite(gain, "gain");
  if (x0.size() != static_cast<Eigen::Index>(agent_count()) * n_state) {
    throw ScenarioError("x0 has " + std::to_string(x0.size()) + " entries, expected " +
                        std::to_string(agent_count() * n_state));
  }
  if (!x0.allFinite()) throw ScenarioError("x0 is not finite");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ScenarioError("horizon must be >= 0");
  if (!(input_delay >= 0.0) || !std::isfinite(input_delay)) {
    throw ScenarioError("input delay must be >= 0");
  }
  if (saturation && !(*saturation > 0.0)) throw ScenarioError("saturation rho_s must be > 0");
  if (mode == Mode::saturated && !saturation) {
    throw ScenarioError("saturated mode needs a saturation rho_s");
  }
  validate_error_model(error_model);
  const bool triggered = std::holds_alternative<EventTrigger>(error_model);
  if (mode == Mode::event_triggered && !triggered) {
    throw ScenarioError("event_triggered mode needs an event_trigger error model");
  }
  if (schedule) schedule->validate();
  if (!schedules.empty()) {
    if (static_cast<int>(schedules.size()) != channel_count()) {
      throw ScenarioError("expected " + std::to_string(channel_count()) +
                          " explicit schedules, got " + std::to_string(schedules.size()));
    }
    for (std::size_t c = 0; c < schedules.size(); ++c) {
      if (schedules[c].channel_id != static_cast<int>(c)) {
        throw ScenarioError("explicit schedule " + std::to_string(c) + " has channel id " +
                            std::to_string(schedules[c].channel_id));
      }
    }
  }
  if (!schedule && schedules.empty() && !triggered) {
    throw ScenarioError("scenario needs schedule parameters or explicit schedules");
  }
  if (lyapunov_P && (lyapunov_P->rows() != n_state || lyapunov_P->cols() != n_state)) {
    throw ScenarioError("P must be N x N");
  }
  if (grid_points < 1) throw ScenarioError("grid_points must be >= 1");
}

namespace {

constexpr int kOutputRank = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct QueueEntry {
  double time = 0.0;
  int rank = 0;
  int channel = 0;
  std::uint64_t seq = 0;
  std::size_t payload = 0;
  bool fire = false;
};

struct Later {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    return std::tie(a.time, a.rank, a.channel, a.seq) > std::tie(b.time, b.rank, b.channel, b.seq);
  }
};

struct Pending {
  Vector measured;
  Vector exact;
  double sample_time = 0.0;
  bool fired = true;
};

class Simulator {
 public:
  explicit Simulator(const Scenario& s) : s_(s) {
    s_.validate();
    n_ = s.agent_count();
    dim_ = s.state_dim();
    channels_ = s.channel_count();
    if (s.mode == Mode::abstract_coupled) {
      bm_ = Matrix::Identity(dim_, dim_);
    } else {
      bm_ = s.model.B;
    }
    build_terms();
    if (auto* t = std::get_if<EventTrigger>(&s.error_model)) trigger_ = *t;
    scheduled_ = s.schedule.has_value() || !s.schedules.empty();
  }

  Trace run() {
    x_ = s_.x0;
    t_now_ = 0.0;
    hold_.assign(channels_, Vector::Zero(dim_));
    delivered_.assign(channels_, false);
    ref_.assign(channels_, Vector::Zero(dim_));
    has_ref_.assign(channels_, false);
    last_update_.assign(channels_, -kInf);
    last_check_.assign(channels_, -kInf);
    update_index_.assign(channels_, 0);
    samples_ = Vector::Zero(static_cast<Eigen::Index>(channels_) * dim_);
    sample_times_ = Vector::Zero(channels_);
    sample_seen_.assign(channels_, false);

    trace_.mode = s_.mode;
    trace_.agents = n_;
    trace_.state_dim = dim_;
    trace_.channels = channels_;
    trace_.horizon = s_.horizon;

    if (s_.startup == StartupHold::first_sample) {
      for (int c = 0; c < channels_; ++c) hold_[c] = scaled(channel_value(x_, c));
    }
    recompute_inputs();

    const int grid = s_.horizon > 0.0 ? std::max(2, s_.grid_points) : 1;
    for (int j = 0; j < grid; ++j) {
      const double t = grid == 1 ? 0.0 : s_.horizon * j / (grid - 1);
      push({t, kOutputRank, 0, 0, 0, false});
    }

    if (scheduled_) {
      prepare_schedules();
      next_sample_.assign(channels_, 0);
      for (int c = 0; c < channels_; ++c) push_next_sample(c);
    } else {
      for (int c = 0; c < channels_; ++c) {
        push({0.0, static_cast<int>(EventKind::trigger_check), c, 0, 0, true});
      }
      armed_.assign(channels_, false);
      generation_.assign(channels_, 0);
    }

    snapshot_pending_ = true;
    while (!queue_.empty()) {
      const QueueEntry e = queue_.top();
      if (e.time > t_now_ && e.time <= s_.horizon && trigger_ && !scheduled_ && crossing_before(e.time)) {
        continue;
      }
      queue_.pop();
      if (e.time > s_.horizon) continue;
      if (++processed_ > kMaxEvents) {
        throw SimulationError("event budget of " + std::to_string(kMaxEvents) +
                              " exhausted at t = " + std::to_string(t_now_));
      }
      if (e.rank == static_cast<int>(EventKind::trigger_check) && !e.fire) {
        handle_check(e);
        continue;
      }
      if (e.time > t_now_) {
        if (snapshot_pending_) snapshot();
        advance_to(e.time);
      }
      snapshot_pending_ = true;
      switch (e.rank) {
        case static_cast<int>(EventKind::deliver): handle_deliver(e); break;
        case static_cast<int>(EventKind::sample): handle_sample(e); break;
        case static_cast<int>(EventKind::dwell_expire): handle_dwell(e); break;
        case static_cast<int>(EventKind::trigger_check): handle_fire(e); break;
        default: break;
      }
    }
    if (snapshot_pending_) snapshot();
    if (t_now_ < s_.horizon) {
      advance_to(s_.horizon);
      snapshot();
    }
    return std::move(trace_);
  }

 private:
  void build_terms() {
    terms_.assign(n_, {});
    if (s_.mode == Mode::abstract_coupled) {
      const Matrix& g = *s_.coupling;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          if (g(i, j) != 0.0) terms_[i].emplace_back(j, g(i, j));
    } else if (is_edge_mode(s_.mode)) {
      for (int p = 0; p < channels_; ++p) {
        const auto [tail, head] = s_.graph.edges()[p];
        ends_.emplace_back(tail - 1, head - 1);
        terms_[head - 1].emplace_back(p, 1.0);
        terms_[tail - 1].emplace_back(p, -1.0);
      }
    } else {
      const Matrix lap = build_algebra(s_.graph).graph_laplacian;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          if (lap(i, j) != 0.0) terms_[i].emplace_back(j, lap(i, j));
    }
  }

  void prepare_schedules() {
    double h = kInf;
    double tau = kInf;
    if (!s_.schedules.empty()) {
      schedules_ = s_.schedules;
      if (s_.schedule) {
        h = s_.schedule->h_max;
        tau = s_.schedule->tau_max;
      }
    } else {
      ScheduleParams p = *s_.schedule;
      p.horizon = s_.horizon;
      h = p.h_max;
      tau = p.tau_max;
      for (int c = 0; c < channels_; ++c) schedules_.push_back(generate_schedule(p, s_.seed, c));
    }
    for (const auto& sch : schedules_) validate_schedule(sch, h, tau);
    trace_.schedules = schedules_;
  }

  void push(QueueEntry e) {
    e.seq = seq_++;
    queue_.push(e);
  }

  void push_next_sample(int c) {
    const std::size_t k = next_sample_[c];
    const auto& sch = schedules_[c];
    if (k >= sch.sample_instants.size()) return;
    if (sch.sample_instants[k] > s_.horizon) return;
    push({sch.sample_instants[k], static_cast<int>(EventKind::sample), c, 0, k, false});
  }

  Vector channel_value(const Vector& x, int c) const {
    if (is_edge_mode(s_.mode)) {
      const auto [tail, head] = ends_[c];
      return x.segment(static_cast<Eigen::Index>(head) * dim_, dim_) -
             x.segment(static_cast<Eigen::Index>(tail) * dim_, dim_);
    }
    return x.segment(static_cast<Eigen::Index>(c) * dim_, dim_);
  }

  Vector scaled(const Vector& v) const {
    if (!s_.saturation) return v;
    return saturation_scale(v, *s_.saturation).scaled;
  }

  void recompute_inputs() {
    u_ = Matrix::Zero(bm_.cols(), n_);
    for (int i = 0; i < n_; ++i) {
      Vector acc = Vector::Zero(dim_);
      for (const auto& [c, coeff] : terms_[i]) acc += coeff * hold_[c];
      u_.col(i) = -(s_.gain * acc);
    }
  }

  Vector propagate(const Vector& x, double dt) const {
    if (dt <= 0.0) return x;
    const ZohStep step = zoh_step(s_.model.A, bm_, dt);
    Vector out(x.size());
    for (int i = 0; i < n_; ++i) {
      const Eigen::Index off = static_cast<Eigen::Index>(i) * dim_;
      out.segment(off, dim_) = step.ad * x.segment(off, dim_) + step.bd * u_.col(i);
    }
    return out;
  }

  void advance_to(double t) {
    x_ = propagate(x_, t - t_now_);
    if (!x_.allFinite()) {
      throw SimulationError("state became non-finite at t = " + std::to_string(t));
    }
    t_now_ = t;
  }

  void snapshot() {
    if (!trace_.times.empty() && trace_.times.back() == t_now_) {
      trace_.states.back() = x_;
      trace_.channel_samples.back() = samples_;
      trace_.channel_sample_times.back() = sample_times_;
      trace_.all_delivered.back() = seen_count_ == channels_;
    } else {
      trace_.times.push_back(t_now_);
      trace_.states.push_back(x_);
      trace_.channel_samples.push_back(samples_);
      trace_.channel_sample_times.push_back(sample_times_);
      trace_.all_delivered.push_back(seen_count_ == channels_);
    }
    snapshot_pending_ = false;
  }

  void enqueue_delivery(int c, double t_sample, double delay, Pending p) {
    const double t = t_sample + delay + s_.input_delay;
    if (t > s_.horizon) return;
    pending_.push_back(std::move(p));
    push({t, static_cast<int>(EventKind::deliver), c, 0, pending_.size() - 1, false});
  }

  void handle_sample(const QueueEntry& e) {
    const int c = e.channel;
    const std::size_t k = e.payload;
    const Vector value = channel_value(x_, c);
    const double delay = schedules_[c].delays[k];
    Pending p;
    p.exact = value;
    p.sample_time = t_now_;
    if (trigger_) {
      // The dwell window runs from the last hold update, so that delivered
      // updates (not just fired samples) stay at least a dwell time apart.
      const bool in_dwell = has_ref_[c] && t_now_ - last_update_[c] < trigger_->dwell;
      p.fired = !has_ref_[c] || (!in_dwell && event_trigger_fires(*trigger_, value, ref_[c]));
      p.measured = value;
      if (p.fired) {
        ref_[c] = value;
        has_ref_[c] = true;
      }
    } else {
      const CounterRng rng(s_.seed, rng_stream(c, RngPurpose::error));
      p.measured = measure(s_.error_model, value, rng, k).measured;
    }
    trace_.events.push_back({t_now_, c, EventKind::sample, p.fired});
    enqueue_delivery(c, t_now_, delay, std::move(p));
    ++next_sample_[c];
    push_next_sample(c);
  }

  void handle_deliver(const QueueEntry& e) {
    const int c = e.channel;
    Pending& p = pending_[e.payload];
    if (p.fired) {
      hold_[c] = scaled(p.measured);
      delivered_[c] = true;
      if (trigger_) last_update_[c] = t_now_;
      trace_.holds.push_back({t_now_, c, p.sample_time, hold_[c]});
      recompute_inputs();
    }
    samples_.segment(static_cast<Eigen::Index>(c) * dim_, dim_) = p.exact;
    sample_times_(c) = p.sample_time;
    if (!sample_seen_[c]) {
      sample_seen_[c] = true;
      ++seen_count_;
    }
    trace_.events.push_back({t_now_, c, EventKind::deliver, p.fired});
    p = Pending{};
  }

  // Update of a purely event-triggered channel at the current instant.
  void handle_fire(const QueueEntry& e) {
    const int c = e.channel;
    if (e.payload != generation_[c]) return;
    const Vector value = channel_value(x_, c);
    ref_[c] = value;
    has_ref_[c] = true;
    last_update_[c] = t_now_;
    last_check_[c] = t_now_;
    ++update_index_[c];
    trace_.events.push_back({t_now_, c, EventKind::trigger_check, true});
    enqueue_delivery(c, t_now_, 0.0, Pending{value, value, t_now_, true});
    const double expire = t_now_ + trigger_->dwell;
    if (expire <= s_.horizon) {
      push({expire, static_cast<int>(EventKind::dwell_expire), c, 0, 0, false});
    }
  }

  void handle_dwell(const QueueEntry& e) {
    const int c = e.channel;
    trace_.events.push_back({t_now_, c, EventKind::dwell_expire, false});
    last_check_[c] = t_now_;
    armed_[c] = true;
    ++generation_[c];
    push({t_now_, static_cast<int>(EventKind::trigger_check), c, 0, generation_[c], false});
  }

  bool fires_at(int c, double t) const {
    const Vector x = propagate(x_, t - t_now_);
    return event_trigger_fires(*trigger_, channel_value(x, c), ref_[c]);
  }

  // First firing instant in [lo, hi] to 1e-9, given that hi fires.
  double first_firing(int c, double lo, double hi) const {
    if (fires_at(c, lo)) return lo;
    while (hi - lo > 1e-9) {
      const double mid = 0.5 * (lo + hi);
      if (fires_at(c, mid)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  }

  void schedule_fire(int c, double t) {
    armed_[c] = false;
    ++generation_[c];
    push({t, static_cast<int>(EventKind::trigger_check), c, 0, generation_[c], true});
  }

  // Inputs only change at events, so an armed channel that would fire before
  // the next event is caught here rather than at its next periodic check.
  bool crossing_before(double t) {
    bool found = false;
    for (int c = 0; c < channels_; ++c) {
      if (!armed_[c] || !fires_at(c, t)) continue;
      schedule_fire(c, first_firing(c, std::max(t_now_, last_check_[c]), t));
      found = true;
    }
    return found;
  }

  // Periodic check at e.time, propagated from the last event.
  void handle_check(const QueueEntry& e) {
    const int c = e.channel;
    if (!armed_[c] || e.payload != generation_[c]) return;
    const double tc = e.time;
    trace_.events.push_back({tc, c, EventKind::trigger_check, false});
    if (fires_at(c, tc)) {
      schedule_fire(c, first_firing(c, std::max(t_now_, last_check_[c]), tc));
      return;
    }
    last_check_[c] = tc;
    const double next = tc + trigger_->dwell / 50.0;
    if (next <= s_.horizon) {
      push({next, static_cast<int>(EventKind::trigger_check), c, 0, generation_[c], false});
    }
  }

  const Scenario& s_;
  int n_ = 0;
  int dim_ = 0;
  int channels_ = 0;
  Matrix bm_;
  std::vector<std::vector<std::pair<int, double>>> terms_;
  std::vector<std::pair<int, int>> ends_;
  std::optional<EventTrigger> trigger_;
  bool scheduled_ = false;
  std::vector<ChannelSchedule> schedules_;
  std::vector<std::size_t> next_sample_;
  std::vector<bool> armed_;
  std::vector<std::size_t> generation_;

  Vector x_;
  double t_now_ = 0.0;
  Matrix u_;
  std::vector<Vector> hold_;
  std::vector<bool> delivered_;
  std::vector<Vector> ref_;
  std::vector<bool> has_ref_;
  std::vector<double> last_update_;
  std::vector<double> last_check_;
  std::vector<std::uint64_t> update_index_;
  Vector samples_;
  Vector sample_times_;
  std::vector<bool> sample_seen_;
  int seen_count_ = 0;

  std::priority_queue<QueueEntry, std::vector<QueueEntry>, Later> queue_;
  std::vector<Pending> pending_;
  std::uint64_t seq_ = 0;
  std::size_t processed_ = 0;
  bool snapshot_pending_ = false;
  Trace trace_;
};

}  // namespace

Trace run(const Scenario& s) {
  if (std::holds_alternative<EventTrigger>(s.error_model)) return run_event_triggered(s);
  return Simulator(s).run();
}

Trace run_event_triggered(const Scenario& s) {
  if (!std::holds_alternative<EventTrigger>(s.error_model)) {
    throw ScenarioError("run_event_triggered needs an event_trigger error model");
  }
  return Simulator(s).run();
}

}  // namespace async_lab

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "async_lab/design.hpp"
#include "async_lab/errors.hpp"
#include "async_lab/sim.hpp"
#include "support/random_cases.hpp"
#include "support/schedule_checker.hpp"

using namespace async_lab;

namespace {

LtiModel oscillator() {
  LtiModel m;
  m.A = Matrix(2, 2);
  m.A << 0, 1, -1, 0;
  m.B = Matrix(2, 1);
  m.B << 0, 1;
  return m;
}

LtiModel integrator() { return {Matrix::Zero(1, 1), Matrix::Ones(1, 1)}; }

Scenario integrators_on(const InteractionGraph& g, Mode mode, Vector x0, double horizon) {
  Scenario s;
  s.mode = mode;
  s.model = integrator();
  s.gain = Matrix::Ones(1, 1);
  s.graph = g;
  s.schedule = ScheduleParams{0.02, 0.05, 0.01, 0.0};
  s.x0 = std::move(x0);
  s.horizon = horizon;
  s.seed = 3;
  return s;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Scenario random_triggered(std::mt19937_64& rng, bool with_schedule) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 2 + static_cast<int>(u(rng) * 5);
  const InteractionGraph g = oracle::random_connected_graph(rng, n);
  Vector x0(n);
  for (int i = 0; i < n; ++i) x0(i) = 4.0 * u(rng) - 2.0;
  Scenario s = integrators_on(g, Mode::event_triggered, x0, 3.0);
  EventTrigger t;
  t.omega = 0.05 + 0.2 * u(rng);
  t.dwell = 0.01 + 0.05 * u(rng);
  if (u(rng) < 0.5) {
    t.form = TriggerForm::capped;
    t.cap = 0.05 + 0.1 * u(rng);
  }
  s.error_model = t;
  if (with_schedule) {
    const double h_min = t.dwell;
    s.schedule = ScheduleParams{h_min, h_min * 1.3, h_min * 0.8, 0.0};
  } else {
    s.schedule.reset();
  }
  s.seed = static_cast<std::uint64_t>(u(rng) * 1e6);
  return s;
}

}  // namespace

TEST(Sim, UncoupledAgentAtRest) {
  Scenario s = integrators_on(InteractionGraph(1, {}), Mode::broadcast, vec({0.7}), 5.0);
  s.gain = Matrix::Zero(1, 1);
  const Trace tr = run(s);
  for (const Vector& x : tr.states) EXPECT_EQ(x(0), 0.7);
}

TEST(Sim, FreeOscillatorRotates) {
  Scenario s;
  s.mode = Mode::broadcast;
  s.model = oscillator();
  s.gain = Matrix::Zero(1, 2);
  s.graph = InteractionGraph(1, {});
  s.schedule = ScheduleParams{0.1, 0.3, 0.05, 0.0};
  s.x0 = vec({1.0, 0.5});
  s.horizon = 20.0;
  const Trace tr = run(s);
  for (std::size_t j = 0; j < tr.times.size(); ++j) {
    EXPECT_NEAR(tr.states[j].norm(), std::sqrt(1.25), 1e-10);
    EXPECT_NEAR(tr.states[j](0), std::cos(tr.times[j]) + 0.5 * std::sin(tr.times[j]), 1e-10);
  }
}

TEST(Sim, IdenticalStatesStayInConsensus) {
  Scenario s = integrators_on(InteractionGraph::cycle(4), Mode::relative_edges,
                              vec({1.5, 1.5, 1.5, 1.5}), 3.0);
  const Metrics m = compute_metrics(run(s), s);
  for (double d : m.delta_sq) EXPECT_EQ(d, 0.0);
}

TEST(Sim, MeanCentering) {
  Scenario s = integrators_on(InteractionGraph(2, {{1, 2}}), Mode::relative_edges, vec({0.0, 2.0}), 1.0);
  const Metrics m = compute_metrics(run(s), s);
  EXPECT_DOUBLE_EQ(m.delta0_sq, 2.0);  // δ(0) = (-1, 1)
  EXPECT_DOUBLE_EQ(consensus_error_sq(s.model.A, s.x0, s.x0, 2, 0.0), 2.0);
}

TEST(Sim, ZeroHorizonHasOnlyInitialSnapshot) {
  Scenario s = integrators_on(InteractionGraph::cycle(3), Mode::broadcast, vec({1, 2, 3}), 0.0);
  const Trace tr = run(s);
  ASSERT_EQ(tr.times.size(), 1u);
  EXPECT_EQ(tr.states[0], s.x0);
  EXPECT_TRUE(tr.holds.empty());
}

TEST(Sim, SnapshotGridAndEventTimes) {
  Scenario s = integrators_on(InteractionGraph::cycle(3), Mode::broadcast, vec({1, 2, 3}), 2.0);
  const Trace tr = run(s);
  EXPECT_TRUE(std::is_sorted(tr.times.begin(), tr.times.end()));
  EXPECT_EQ(std::adjacent_find(tr.times.begin(), tr.times.end()), tr.times.end());
  EXPECT_EQ(tr.times.front(), 0.0);
  EXPECT_EQ(tr.times.back(), 2.0);
  for (const auto& e : tr.events) EXPECT_TRUE(std::binary_search(tr.times.begin(), tr.times.end(), e.time));
  EXPECT_GE(tr.times.size(), 1000u);
}

TEST(Sim, Deterministic) {
  Scenario s = integrators_on(InteractionGraph::cycle(5), Mode::broadcast, vec({1, -2, 3, 0.5, -1}), 4.0);
  s.error_model = MultiplicativeError{0.05, false};
  const Trace a = run(s);
  const Trace b = run(s);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    EXPECT_EQ(a.events[k].time, b.events[k].time);
    EXPECT_EQ(a.events[k].channel, b.events[k].channel);
    EXPECT_EQ(a.events[k].kind, b.events[k].kind);
  }
  EXPECT_EQ(a.states.back(), b.states.back());
}

TEST(Sim, HoldsEqualErroredSamples) {
  Scenario s;
  s.mode = Mode::relative_edges;
  s.model = oscillator();
  s.graph = InteractionGraph::cycle(4);
  s.gain = riccati_design(s.model, 2.0, 1.0).K;
  s.schedule = ScheduleParams{0.01, 0.03, 0.008, 0.0};
  s.error_model = MultiplicativeError{0.04, false};
  s.x0 = vec({1, 0, -1, 0.5, 2, -1, 0.5, 1.5});
  s.horizon = 2.0;
  s.seed = 19;
  const Trace tr = run(s);
  ASSERT_FALSE(tr.holds.empty());
  std::map<int, std::size_t> index;  // per-channel sample counter
  for (const HoldChange& h : tr.holds) {
    const auto& sch = tr.schedules[h.channel];
    const auto it = std::find(sch.sample_instants.begin(), sch.sample_instants.end(), h.sample_time);
    ASSERT_NE(it, sch.sample_instants.end());
    const std::size_t k = static_cast<std::size_t>(it - sch.sample_instants.begin());
    EXPECT_DOUBLE_EQ(h.time, h.sample_time + sch.delays[k]);
    const auto jt = std::lower_bound(tr.times.begin(), tr.times.end(), h.sample_time);
    ASSERT_EQ(*jt, h.sample_time);
    const Vector& x = tr.states[jt - tr.times.begin()];
    const auto [a, b] = s.graph.edges()[h.channel];
    const Vector z = x.segment(2 * (b - 1), 2) - x.segment(2 * (a - 1), 2);
    const CounterRng rng(s.seed, rng_stream(h.channel, RngPurpose::error));
    EXPECT_LT((h.value - measure(s.error_model, z, rng, k).measured).norm(), 1e-14);
  }
}

TEST(Sim, ExplicitScheduleViolationIsScheduleError) {
  Scenario s = integrators_on(InteractionGraph(2, {{1, 2}}), Mode::relative_edges, vec({0, 1}), 1.0);
  ChannelSchedule bad;
  bad.channel_id = 0;
  bad.sample_instants = {0.0, 0.2};
  bad.delays = {0.0, 0.0};
  s.schedules = {bad};
  EXPECT_THROW(run(s), ScheduleError);
}

TEST(Sim, DimensionMismatchIsScenarioError) {
  Scenario s = integrators_on(InteractionGraph::cycle(3), Mode::broadcast, vec({1, 2}), 1.0);
  EXPECT_THROW(run(s), ScenarioError);
}

TEST(Sim, DisconnectedEdgeModeRejected) {
  Scenario s = integrators_on(InteractionGraph(4, {{1, 2}, {3, 4}}), Mode::relative_edges,
                              vec({1, 2, 3, 4}), 1.0);
  EXPECT_THROW(run(s), ScenarioError);
}

TEST(Sim, InputDelayShiftsDeliveries) {
  Scenario s = integrators_on(InteractionGraph::cycle(3), Mode::broadcast, vec({1, 2, 3}), 2.0);
  s.input_delay = 0.015;
  const Trace tr = run(s);
  for (const HoldChange& h : tr.holds) {
    const auto& sch = tr.schedules[h.channel];
    const auto k = std::find(sch.sample_instants.begin(), sch.sample_instants.end(), h.sample_time) -
                   sch.sample_instants.begin();
    EXPECT_NEAR(h.time, h.sample_time + sch.delays[k] + 0.015, 1e-15);
  }
}

TEST(Sim, SaturatedHoldsRespectLevel) {
  Scenario s = integrators_on(InteractionGraph::cycle(4), Mode::saturated, vec({5, -4, 3, 0}), 3.0);
  s.saturation = 0.5;
  const Trace tr = run(s);
  for (const HoldChange& h : tr.holds) EXPECT_LE(h.value.cwiseAbs().maxCoeff(), 0.5);
}

TEST(Sim, AbstractModeSampledStateFeedback) {
  Scenario s;
  s.mode = Mode::abstract_coupled;
  s.model = integrator();
  s.coupling = Matrix::Identity(2, 2);
  s.gain = Matrix::Ones(1, 1);
  s.schedule = ScheduleParams{0.01, 0.01, 0.0, 0.0};
  s.x0 = vec({1.0, -1.0});
  s.horizon = 5.0;
  const Metrics m = compute_metrics(run(s), s);
  EXPECT_LT(m.final_delta_sq, 1e-3);
}

TEST(EventTriggered, NeverFiringTriggerUpdatesOnce) {
  Scenario s = integrators_on(InteractionGraph::cycle(4), Mode::event_triggered, vec({1, 2, 3, 4}), 2.0);
  s.schedule.reset();
  EventTrigger t;
  t.omega = 1e12;
  t.dwell = 0.05;
  s.error_model = t;
  const Trace tr = run(s);
  std::map<int, int> count;
  for (const HoldChange& h : tr.holds) ++count[h.channel];
  ASSERT_EQ(count.size(), 4u);
  for (const auto& [c, k] : count) EXPECT_EQ(k, 1) << "channel " << c;
}

TEST(EventTriggered, ZenoFreeOnRandomRuns) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Scenario s = random_triggered(rng, trial % 2 == 0);
    const Trace tr = run(s);
    const Metrics m = compute_metrics(tr, s);
    const double dwell = std::get<EventTrigger>(s.error_model).dwell;
    EXPECT_GE(m.min_update_gap, dwell * (1 - 1e-12)) << "trial " << trial;
    for (const auto& sch : tr.schedules) {
      EXPECT_EQ(oracle::check_schedule(sch.sample_instants, sch.delays, s.schedule->h_max,
                                       s.schedule->tau_max),
                "");
    }
  }
}

TEST(EventTriggered, TriggerConditionHoldsOutsideDwell) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Scenario s = random_triggered(rng, false);
    EventTrigger t = std::get<EventTrigger>(s.error_model);
    t.form = TriggerForm::quadratic;
    t.cap.reset();
    s.error_model = t;
    const Trace tr = run(s);
    std::vector<const HoldChange*> last(tr.channels, nullptr);
    std::size_t next = 0;
    for (std::size_t j = 0; j < tr.times.size(); ++j) {
      while (next < tr.holds.size() && tr.holds[next].time <= tr.times[j]) {
        last[tr.holds[next].channel] = &tr.holds[next];
        ++next;
      }
      for (int c = 0; c < tr.channels; ++c) {
        if (!last[c] || tr.times[j] - last[c]->time < t.dwell) continue;
        const Vector z = tr.states[j].segment(c, 1);
        const double gap = (z - last[c]->value).squaredNorm();
        EXPECT_LE(gap, t.omega * last[c]->value.squaredNorm() * (1 + 1e-6) + 1e-12)
            << "trial " << trial << " t=" << tr.times[j];
      }
    }
  }
}

TEST(Metrics, AverageStateInvariance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const InteractionGraph g = oracle::random_connected_graph(rng, 3 + trial % 4);
    const int n = g.vertex_count();
    Scenario s;
    s.mode = trial % 2 ? Mode::relative_edges : Mode::broadcast;
    s.model = oscillator();
    s.graph = g;
    s.gain = riccati_design(s.model, algebraic_connectivity(build_algebra(g)), 1.0).K;
    s.schedule = ScheduleParams{0.005, 0.02, 0.004, 0.0};
    s.error_model = trial % 3 == 0 ? ErrorModel{LogQuantizer{1.1}} : ErrorModel{MultiplicativeError{0.01, true}};
    s.x0 = oracle::random_matrix(rng, 2 * n, 1);
    s.horizon = 5.0;
    s.seed = trial;
    const Metrics m = compute_metrics(run(s), s);
    EXPECT_LT(m.average_drift, 1e-9) << "trial " << trial;
  }
}

TEST(Metrics, MissingLyapunovMatrixWarns) {
  Scenario s = integrators_on(InteractionGraph::cycle(3), Mode::relative_edges, vec({1, 2, 3}), 1.0);
  const Metrics m = compute_metrics(run(s), s);
  EXPECT_TRUE(m.V.empty());
  EXPECT_FALSE(m.warnings.empty());
  s.lyapunov_P = Matrix::Ones(1, 1);
  const Metrics mv = compute_metrics(run(s), s);
  EXPECT_EQ(mv.V.size(), mv.t.size());
}

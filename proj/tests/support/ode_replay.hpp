#pragma once

// Re-simulates a scenario with an adaptive Runge-Kutta-Fehlberg 7(8)
// integrator. Only the sample schedules are taken from the trace; states,
// measurements, delivery order and the held inputs are rebuilt here.

#include <cstdint>
#include <queue>
#include <tuple>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "async_lab/sampling.hpp"
#include "async_lab/sim.hpp"
#include "random_cases.hpp"

namespace oracle {

inline Eigen::VectorXd ode_replay(const async_lab::Scenario& s, const async_lab::Trace& trace,
                                  double abs_tol = 1e-12, double rel_tol = 1e-12) {
  using namespace async_lab;
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;

  const int n = s.agent_count();
  const int dim = s.state_dim();
  const bool abstract = s.mode == Mode::abstract_coupled;
  const bool edge = is_edge_mode(s.mode);
  const Eigen::MatrixXd bm = abstract ? Eigen::MatrixXd::Identity(dim, dim) : s.model.B;

  // coupling coefficient of channel c in agent i's input
  Eigen::MatrixXd coeff;
  int channels = 0;
  if (abstract) {
    coeff = *s.coupling;
    channels = n;
  } else if (edge) {
    channels = s.graph.edge_count();
    coeff = Eigen::MatrixXd::Zero(n, channels);
    for (int p = 0; p < channels; ++p) {
      const auto [a, b] = s.graph.edges()[p];
      coeff(b - 1, p) = 1.0;
      coeff(a - 1, p) = -1.0;
    }
  } else {
    coeff = laplacian_from_edges(s.graph);
    channels = n;
  }

  auto channel_value = [&](const Eigen::VectorXd& x, int c) -> Eigen::VectorXd {
    if (edge) {
      const auto [a, b] = s.graph.edges()[c];
      return x.segment((b - 1) * dim, dim) - x.segment((a - 1) * dim, dim);
    }
    return x.segment(c * dim, dim);
  };

  std::vector<Eigen::VectorXd> hold(channels, Eigen::VectorXd::Zero(dim));
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(bm.cols(), n);
  auto refresh_inputs = [&] {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
      for (int c = 0; c < channels; ++c) acc += coeff(i, c) * hold[c];
      u.col(i) = -(s.gain * acc);
    }
  };
  refresh_inputs();

  auto rhs = [&](const State& xs, State& dx, double) {
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const Eigen::VectorXd> xi(xs.data() + i * dim, dim);
      Eigen::Map<Eigen::VectorXd> di(dx.data() + i * dim, dim);
      di = s.model.A * xi + bm * u.col(i);
    }
  };

  // (time, rank, channel, seq): deliveries (rank 0) precede samples (rank 1)
  using Ev = std::tuple<double, int, int, std::uint64_t, std::uint64_t>;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<>> queue;
  std::uint64_t seq = 0;
  std::vector<Eigen::VectorXd> in_flight;
  for (int c = 0; c < channels; ++c) {
    const auto& sch = trace.schedules[c];
    for (std::size_t k = 0; k < sch.sample_instants.size(); ++k) {
      if (sch.sample_instants[k] <= s.horizon) queue.emplace(sch.sample_instants[k], 1, c, seq++, k);
    }
  }

  State x(s.x0.data(), s.x0.data() + s.x0.size());
  double t = 0.0;
  auto advance = [&](double t1) {
    if (t1 > t) {
      odeint::integrate_adaptive(
          odeint::make_controlled(abs_tol, rel_tol, odeint::runge_kutta_fehlberg78<State>()), rhs,
          x, t, t1, std::min(1e-3, t1 - t));
      t = t1;
    }
  };

  while (!queue.empty()) {
    const auto [te, rank, c, sq, payload] = queue.top();
    queue.pop();
    advance(te);
    if (rank == 0) {
      Eigen::VectorXd v = in_flight[payload];
      if (s.saturation) v = saturation_scale(v, *s.saturation).scaled;
      hold[c] = v;
      refresh_inputs();
    } else {
      const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
      const Eigen::VectorXd value = channel_value(xv, c);
      const CounterRng rng(s.seed, rng_stream(c, RngPurpose::error));
      in_flight.push_back(measure(s.error_model, value, rng, payload).measured);
      const double td = te + trace.schedules[c].delays[payload] + s.input_delay;
      if (td <= s.horizon) queue.emplace(td, 0, c, seq++, in_flight.size() - 1);
    }
  }
  advance(s.horizon);
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

}  // namespace oracle

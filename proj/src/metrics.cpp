#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "async_lab/errors.hpp"
#include "async_lab/sim.hpp"

namespace async_lab {
namespace {

Vector stacked_sum(const Vector& x, int agents, int dim) {
  Vector sum = Vector::Zero(dim);
  for (int i = 0; i < agents; ++i) sum += x.segment(static_cast<Eigen::Index>(i) * dim, dim);
  return sum;
}

}  // namespace

double consensus_error_sq(const Matrix& a, const Vector& x, const Vector& x0, int agents,
                          double t) {
  const int dim = static_cast<int>(a.rows());
  const Vector kappa = expm(a, t) * stacked_sum(x0, agents, dim) / agents;
  double acc = 0.0;
  for (int i = 0; i < agents; ++i) {
    acc += (x.segment(static_cast<Eigen::Index>(i) * dim, dim) - kappa).squaredNorm();
  }
  return acc;
}

Metrics compute_metrics(const Trace& trace, const Scenario& s,
                        std::optional<double> consensus_tol) {
  Metrics m;
  const int n = trace.agents;
  const int dim = trace.state_dim;
  const Matrix& a = s.model.A;
  const bool abstract = trace.mode == Mode::abstract_coupled;
  const bool edge = is_edge_mode(trace.mode);
  const bool broadcast = is_broadcast_mode(trace.mode);
  const Vector sum0 = stacked_sum(s.x0, n, dim);
  if (edge && !s.lyapunov_P) m.warnings.push_back("V(t) skipped: no P supplied");

  const std::size_t count = trace.times.size();
  m.t = trace.times;
  m.delta_sq.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double t = trace.times[j];
    const Vector& x = trace.states[j];
    if (abstract) {
      m.delta_sq.push_back(x.squaredNorm());
    } else {
      const Vector avg = expm(a, t) * sum0;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += (x.segment(static_cast<Eigen::Index>(i) * dim, dim) - avg / n).squaredNorm();
      }
      m.delta_sq.push_back(acc);
      const double drift = (stacked_sum(x, n, dim) - avg).norm() / std::max(1.0, avg.norm());
      m.average_drift = std::max(m.average_drift, drift);
    }
    if (edge && s.lyapunov_P) {
      double v = 0.0;
      for (const auto& [tail, head] : s.graph.edges()) {
        const Vector z = x.segment(static_cast<Eigen::Index>(head - 1) * dim, dim) -
                         x.segment(static_cast<Eigen::Index>(tail - 1) * dim, dim);
        v += z.dot(*s.lyapunov_P * z);
      }
      m.V.push_back(0.5 * v);
    }
    if (broadcast) {
      if (!trace.all_delivered[j]) {
        m.delta_tilde_sq.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          const double ts = trace.channel_sample_times[j](i);
          const Vector kappa = expm(a, ts) * sum0 / n;
          acc += (trace.channel_samples[j].segment(static_cast<Eigen::Index>(i) * dim, dim) - kappa)
                     .squaredNorm();
        }
        m.delta_tilde_sq.push_back(acc);
      }
    }
  }

  const int windows = std::max(1, static_cast<int>(std::ceil(trace.horizon / m.window - 1e-9)));
  m.update_counts.assign(windows, 0);
  std::map<int, double> last_hold;
  m.min_update_gap = std::numeric_limits<double>::infinity();
  for (const HoldChange& h : trace.holds) {
    const int w = std::min(windows - 1, static_cast<int>(h.time / m.window));
    ++m.update_counts[std::max(0, w)];
    if (auto it = last_hold.find(h.channel); it != last_hold.end()) {
      m.min_update_gap = std::min(m.min_update_gap, h.time - it->second);
    }
    last_hold[h.channel] = h.time;
  }

  if (count > 0) {
    m.delta0_sq = m.delta_sq.front();
    m.final_delta_sq = m.delta_sq.back();
    m.consensus_tol = consensus_tol.value_or(1e-8 * (1.0 + m.delta0_sq));
    const double t_end = trace.times.back();
    bool ok = true;
    for (std::size_t j = 0; j < count; ++j) {
      if (trace.times[j] >= t_end - 1.0 && !(m.delta_sq[j] < m.consensus_tol)) ok = false;
    }
    m.consensus = ok;
  }
  return m;
}

}  // namespace async_lab

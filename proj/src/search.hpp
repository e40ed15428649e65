#pragma once

// Derivative-free maximisers shared by the budget searches.

#include <cmath>
#include <limits>
#include <optional>

namespace async_lab::detail {

struct Optimum2 {
  double value = -std::numeric_limits<double>::infinity();
  double x = 0.0;
  double y = 0.0;
};

/// Golden-section maximisation of a unimodal f on [lo, hi] to width tol.
template <class F>
double golden_max(F&& f, double lo, double hi, double tol, double* best_value = nullptr) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  if (best_value) *best_value = f(x);
  return x;
}

inline constexpr double kLogLo = -9.0;
inline constexpr double kLogHi = 9.0;

/// Coordinate ascent in (x, y) from a start point; each line search is a
/// golden section over [kLogLo, kLogHi].
template <class F>
Optimum2 coordinate_ascent(F&& f, double x, double y, double tol = 1e-6) {
  Optimum2 best{f(x, y), x, y};
  for (int sweep = 0; sweep < 60; ++sweep) {
    double vx = 0.0;
    const double nx = golden_max([&](double t) { return f(t, best.y); }, kLogLo, kLogHi, tol, &vx);
    if (vx > best.value) {
      best.value = vx;
      best.x = nx;
    }
    double vy = 0.0;
    const double ny = golden_max([&](double t) { return f(best.x, t); }, kLogLo, kLogHi, tol, &vy);
    const double moved_x = std::abs(nx - x);
    const double moved_y = std::abs(ny - y);
    if (vy > best.value) {
      best.value = vy;
      best.y = ny;
    }
    x = best.x;
    y = best.y;
    if (moved_x < tol && moved_y < tol) break;
  }
  return best;
}

/// 20x20 grid over [-3, 3]² (log10 coordinates), then coordinate ascent from
/// the best grid point, or directly from `seed` when one is given.
template <class F>
Optimum2 maximize_log_grid_then_descent(F&& f, std::optional<Optimum2> seed = std::nullopt) {
  if (seed) return coordinate_ascent(f, seed->x, seed->y);
  Optimum2 best;
  constexpr int kGrid = 20;
  for (int i = 0; i < kGrid; ++i) {
    const double x = -3.0 + 6.0 * i / (kGrid - 1);
    for (int j = 0; j < kGrid; ++j) {
      const double y = -3.0 + 6.0 * j / (kGrid - 1);
      const double v = f(x, y);
      if (v > best.value) best = {v, x, y};
    }
  }
  return coordinate_ascent(f, best.x, best.y);
}

}  // namespace async_lab::detail

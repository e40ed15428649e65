#pragma once

// Random matrices and graphs for property tests (std::mt19937_64).

#include <algorithm>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "async_lab/graphs.hpp"

namespace oracle {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double lo = -2.0,
                                     double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Random spanning tree plus a few extra edges; vertices are 1-based.
inline async_lab::InteractionGraph random_connected_graph(std::mt19937_64& rng, int n,
                                                          double extra_prob = 0.3) {
  std::set<std::pair<int, int>> edges;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i + 1;
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    const int a = order[i];
    const int b = order[pick(rng)];
    edges.insert({std::min(a, b), std::max(a, b)});
  }
  std::bernoulli_distribution extra(extra_prob);
  for (int a = 1; a <= n; ++a)
    for (int b = a + 1; b <= n; ++b)
      if (extra(rng)) edges.insert({a, b});
  return async_lab::InteractionGraph(n, {edges.begin(), edges.end()});
}

// Laplacian built straight from the edge list.
inline Eigen::MatrixXd laplacian_from_edges(const async_lab::InteractionGraph& g) {
  const int n = g.vertex_count();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [a, b] : g.edges()) {
    l(a - 1, a - 1) += 1.0;
    l(b - 1, b - 1) += 1.0;
    l(a - 1, b - 1) -= 1.0;
    l(b - 1, a - 1) -= 1.0;
  }
  return l;
}

}  // namespace oracle

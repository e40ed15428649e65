#include "async_lab/graphs.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

#include "async_lab/errors.hpp"

namespace async_lab {

InteractionGraph::InteractionGraph(int n, std::vector<Edge> edges) : n_(n) {
  if (n < 1) throw InvalidGraphError("graph must have at least one vertex");
  for (auto& [i, j] : edges) {
    if (i < 1 || i > n || j < 1 || j > n) {
      throw InvalidGraphError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                              ") has a vertex outside 1.." + std::to_string(n));
    }
    if (i == j) throw InvalidGraphError("self-loop at vertex " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw InvalidGraphError("duplicate edge (" + std::to_string(dup->first) + "," +
                            std::to_string(dup->second) + ")");
  }
  edges_ = std::move(edges);
}

std::vector<int> InteractionGraph::neighbours(int v) const {
  std::vector<int> out;
  for (const auto& [i, j] : edges_) {
    if (i == v) out.push_back(j);
    if (j == v) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

InteractionGraph InteractionGraph::cycle(int n) {
  std::vector<Edge> e;
  for (int i = 1; i < n; ++i) e.emplace_back(i, i + 1);
  if (n > 2) e.emplace_back(1, n);
  return InteractionGraph(n, std::move(e));
}

InteractionGraph InteractionGraph::path(int n) {
  std::vector<Edge> e;
  for (int i = 1; i < n; ++i) e.emplace_back(i, i + 1);
  return InteractionGraph(n, std::move(e));
}

InteractionGraph InteractionGraph::star(int n) {
  std::vector<Edge> e;
  for (int i = 2; i <= n; ++i) e.emplace_back(1, i);
  return InteractionGraph(n, std::move(e));
}

InteractionGraph InteractionGraph::complete(int n) {
  std::vector<Edge> e;
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) e.emplace_back(i, j);
  return InteractionGraph(n, std::move(e));
}

Matrix incidence_matrix(const InteractionGraph& g, std::span<const bool> flipped) {
  const int m = g.edge_count();
  if (!flipped.empty() && static_cast<int>(flipped.size()) != m) {
    throw DimensionError("incidence_matrix: one orientation flag per edge expected");
  }
  Matrix d = Matrix::Zero(g.vertex_count(), m);
  for (int p = 0; p < m; ++p) {
    auto [tail, head] = g.edges()[p];
    if (!flipped.empty() && flipped[p]) std::swap(tail, head);
    d(head - 1, p) = 1.0;
    d(tail - 1, p) = -1.0;
  }
  return d;
}

GraphAlgebra build_algebra(const InteractionGraph& g) {
  if (g.vertex_count() < 1) throw InvalidGraphError("empty vertex set");
  GraphAlgebra a;
  a.incidence = incidence_matrix(g);
  a.graph_laplacian = a.incidence * a.incidence.transpose();
  a.edge_laplacian = a.incidence.transpose() * a.incidence;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.graph_laplacian, Eigen::EigenvaluesOnly);
  a.spectrum = solver.eigenvalues();  // increasing
  return a;
}

bool is_connected(const InteractionGraph& g) {
  const int n = g.vertex_count();
  if (n < 1) return false;
  std::vector<std::vector<int>> adj(n);
  for (const auto& [i, j] : g.edges()) {
    adj[i - 1].push_back(j - 1);
    adj[j - 1].push_back(i - 1);
  }
  std::vector<bool> seen(n, false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  int visited = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        ++visited;
        frontier.push(w);
      }
    }
  }
  return visited == n;
}

double algebraic_connectivity(const GraphAlgebra& a) {
  if (a.spectrum.size() < 2) return 0.0;
  return a.spectrum(1);
}

double largest_laplacian_eigenvalue(const GraphAlgebra& a) {
  if (a.spectrum.size() == 0) return 0.0;
  return a.spectrum(a.spectrum.size() - 1);
}

}  // namespace async_lab

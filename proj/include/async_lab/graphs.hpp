#pragma once

#include <span>
#include <utility>
#include <vector>

#include "async_lab/matan.hpp"

namespace async_lab {

/// Undirected simple graph on vertices 1..n.
///
/// Edges are stored canonically as (min, max) and sorted lexicographically;
/// the position of an edge in `edges()` is its edge index (column of the
/// incidence matrix, relative-state channel id).
class InteractionGraph {
 public:
  using Edge = std::pair<int, int>;

  InteractionGraph() = default;
  /// Throws InvalidGraphError on n < 1, self-loops, out-of-range vertices or
  /// duplicate edges. Vertex indices are 1-based.
  InteractionGraph(int n, std::vector<Edge> edges);

  int vertex_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Neighbours of vertex v (1-based), increasing.
  std::vector<int> neighbours(int v) const;

  static InteractionGraph cycle(int n);
  static InteractionGraph path(int n);
  static InteractionGraph star(int n);
  static InteractionGraph complete(int n);

  friend bool operator==(const InteractionGraph&, const InteractionGraph&) = default;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
};

struct GraphAlgebra {
  Matrix incidence;         ///< D, n x m
  Matrix graph_laplacian;   ///< D D^T, n x n
  Matrix edge_laplacian;    ///< D^T D, m x m
  Vector spectrum;          ///< eigenvalues of D D^T, increasing
};

/// Incidence matrix with tail = smaller index, head = larger index; an entry
/// of `flipped` set to true reverses that edge. +1 marks the head.
Matrix incidence_matrix(const InteractionGraph& g, std::span<const bool> flipped = {});

GraphAlgebra build_algebra(const InteractionGraph& g);
bool is_connected(const InteractionGraph& g);
/// λ_2 of the graph Laplacian (0 for a single vertex).
double algebraic_connectivity(const GraphAlgebra& a);
/// λ_n, the largest Laplacian eigenvalue.
double largest_laplacian_eigenvalue(const GraphAlgebra& a);

}  // namespace async_lab

#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

namespace graphfuse {

using SpMat = Eigen::SparseMatrix<double>;
using SpMatR = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Edge {
  int u = 0;
  int v = 0;
  double w = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected weighted graph without self-loops. Edges are stored once with
// u < v and sorted, so equality is bit-exact structural equality.
class Graph {
public:
  Graph() = default;

  // Normalizes endpoint order, merges duplicate edges by summing weights,
  // strips self-loops (counted via dropped_self_loops) and drops zero weights.
  static Graph from_edges(int n, std::vector<Edge> edges,
                          int* dropped_self_loops = nullptr);

  int node_count() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  // Weight of (u,v); 0 when the edge is absent.
  double weight(int u, int v) const;

  Eigen::VectorXd degrees() const;
  SpMat adjacency() const;

  friend bool operator==(const Graph&, const Graph&) = default;

private:
  int n_ = 0;
  std::vector<Edge> edges_;  // sorted by (u,v), u < v, w > 0
};

struct Laplacian {
  int n = 0;
  SpMat matrix;             // D - W
  Eigen::VectorXd degrees;  // row sums of W
};

struct PropagationMatrix {
  int n = 0;
  SpMat matrix;  // D~^{-1/2} (W + I) D~^{-1/2}
};

Laplacian build_laplacian(const Graph& g);

PropagationMatrix renormalize(const Graph& g);

// Binary similarity graph: edge (i,j) iff cos(f_i, f_j) >= threshold
// (strictly > when strict_comparison). Zero-norm rows never produce edges.
Graph cosine_similarity_graph(const SpMatR& features, double threshold = 0.8,
                              bool strict_comparison = false);

// Deletes floor(fraction * count) undirected edges, sampled uniformly without
// replacement among edges with at least one endpoint in test_nodes.
Graph remove_test_structure(const Graph& g, const std::vector<int>& test_nodes,
                            double fraction, std::uint64_t seed);

}  // namespace graphfuse

#include "graphfuse/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "graphfuse/rng.hpp"

namespace graphfuse {

Graph Graph::from_edges(int n, std::vector<Edge> edges,
                        int* dropped_self_loops) {
  if (n < 1) throw std::invalid_argument("Graph: node count must be >= 1");
  int self_loops = 0;
  std::vector<Edge> kept;
  kept.reserve(edges.size());
  for (Edge e : edges) {
    if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
      throw std::invalid_argument("Graph: edge endpoint out of range: (" +
                                  std::to_string(e.u) + "," +
                                  std::to_string(e.v) + ") with n=" +
                                  std::to_string(n));
    if (e.w < 0.0)
      throw std::invalid_argument("Graph: negative edge weight");
    if (!std::isfinite(e.w))
      throw std::invalid_argument("Graph: non-finite edge weight");
    if (e.u == e.v) {
      ++self_loops;
      continue;
    }
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.w == 0.0) continue;
    kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end(), [](const Edge& a, const Edge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  std::vector<Edge> merged;
  merged.reserve(kept.size());
  for (const Edge& e : kept) {
    if (!merged.empty() && merged.back().u == e.u && merged.back().v == e.v)
      merged.back().w += e.w;
    else
      merged.push_back(e);
  }
  if (dropped_self_loops) *dropped_self_loops = self_loops;
  Graph g;
  g.n_ = n;
  g.edges_ = std::move(merged);
  return g;
}

double Graph::weight(int u, int v) const {
  if (u == v) return 0.0;
  if (u > v) std::swap(u, v);
  auto it = std::lower_bound(
      edges_.begin(), edges_.end(), std::make_pair(u, v),
      [](const Edge& e, const std::pair<int, int>& key) {
        return e.u != key.first ? e.u < key.first : e.v < key.second;
      });
  if (it != edges_.end() && it->u == u && it->v == v) return it->w;
  return 0.0;
}

Eigen::VectorXd Graph::degrees() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n_);
  for (const Edge& e : edges_) {
    d(e.u) += e.w;
    d(e.v) += e.w;
  }
  return d;
}

SpMat Graph::adjacency() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(edges_.size() * 2);
  for (const Edge& e : edges_) {
    trip.emplace_back(e.u, e.v, e.w);
    trip.emplace_back(e.v, e.u, e.w);
  }
  SpMat a(n_, n_);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

Laplacian build_laplacian(const Graph& g) {
  Eigen::VectorXd deg = g.degrees();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.edge_count() * 2 + g.node_count());
  for (const Edge& e : g.edges()) {
    trip.emplace_back(e.u, e.v, -e.w);
    trip.emplace_back(e.v, e.u, -e.w);
  }
  for (int i = 0; i < g.node_count(); ++i)
    if (deg(i) != 0.0) trip.emplace_back(i, i, deg(i));
  Laplacian lap;
  lap.n = g.node_count();
  lap.matrix.resize(lap.n, lap.n);
  lap.matrix.setFromTriplets(trip.begin(), trip.end());
  lap.degrees = std::move(deg);
  return lap;
}

PropagationMatrix renormalize(const Graph& g) {
  const int n = g.node_count();
  // D~ii = deg(i) + 1 >= 1, so the inverse square root is always defined.
  Eigen::VectorXd dinv = (g.degrees().array() + 1.0).rsqrt();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.edge_count() * 2 + n);
  for (const Edge& e : g.edges()) {
    double w = e.w * dinv(e.u) * dinv(e.v);
    trip.emplace_back(e.u, e.v, w);
    trip.emplace_back(e.v, e.u, w);
  }
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, dinv(i) * dinv(i));
  PropagationMatrix p;
  p.n = n;
  p.matrix.resize(n, n);
  p.matrix.setFromTriplets(trip.begin(), trip.end());
  return p;
}

Graph cosine_similarity_graph(const SpMatR& features, double threshold,
                              bool strict_comparison) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw std::invalid_argument("cosine_similarity_graph: threshold must be in (0,1]");
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  Eigen::VectorXd norms(n);
  for (int i = 0; i < n; ++i) norms(i) = features.row(i).norm();

  std::vector<Edge> edges;
  auto accept = [&](double cosine) {
    return strict_comparison ? cosine > threshold : cosine >= threshold;
  };

  // Dense blocked Gram products when the feature matrix fits comfortably;
  // row-pair sparse dot products otherwise.
  const bool densify = static_cast<std::int64_t>(n) * d <= 80'000'000;
  if (densify) {
    Eigen::MatrixXd F(n, d);
    F.setZero();
    for (int i = 0; i < n; ++i)
      for (SpMatR::InnerIterator it(features, i); it; ++it)
        F(i, it.col()) = it.value();
    const int block = 512;
    Eigen::MatrixXd gram;
    for (int i0 = 0; i0 < n; i0 += block) {
      int rows = std::min(block, n - i0);
      gram.noalias() = F.middleRows(i0, rows) * F.transpose();
      for (int r = 0; r < rows; ++r) {
        int i = i0 + r;
        if (norms(i) == 0.0) continue;
        for (int j = i + 1; j < n; ++j) {
          if (norms(j) == 0.0) continue;
          double cosine = gram(r, j) / (norms(i) * norms(j));
          if (accept(cosine)) edges.push_back({i, j, 1.0});
        }
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      if (norms(i) == 0.0) continue;
      for (int j = i + 1; j < n; ++j) {
        if (norms(j) == 0.0) continue;
        double dot = features.row(i).dot(features.row(j));
        double cosine = dot / (norms(i) * norms(j));
        if (accept(cosine)) edges.push_back({i, j, 1.0});
      }
    }
  }
  return Graph::from_edges(n, std::move(edges));
}

Graph remove_test_structure(const Graph& g, const std::vector<int>& test_nodes,
                            double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("remove_test_structure: fraction must be in [0,1]");
  std::vector<char> in_test(g.node_count(), 0);
  for (int v : test_nodes) {
    if (v < 0 || v >= g.node_count())
      throw std::invalid_argument("remove_test_structure: test node out of range");
    in_test[v] = 1;
  }
  const auto& edges = g.edges();
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (in_test[edges[i].u] || in_test[edges[i].v]) eligible.push_back(i);

  auto to_remove =
      static_cast<std::size_t>(fraction * static_cast<double>(eligible.size()));
  if (to_remove == 0) return g;

  Rng rng(seed);
  rng.shuffle(eligible);
  std::vector<char> removed(edges.size(), 0);
  for (std::size_t i = 0; i < to_remove; ++i) removed[eligible[i]] = 1;

  std::vector<Edge> kept;
  kept.reserve(edges.size() - to_remove);
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (!removed[i]) kept.push_back(edges[i]);
  return Graph::from_edges(g.node_count(), std::move(kept));
}

}  // namespace graphfuse

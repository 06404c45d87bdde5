#pragma once

// Test-only helpers: independent oracles and deterministic generators.
// Nothing here may call back into the solver paths it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "graphfuse/graph.hpp"
#include "graphfuse/rng.hpp"
#include "graphfuse/spectral.hpp"

namespace testsupport {

using graphfuse::Edge;
using graphfuse::Graph;
using graphfuse::Rng;

// Cyclic-sweep Jacobi eigensolver. Slow and simple; the oracle for every
// eigen comparison, independent of the library's dense/iterative paths.
struct JacobiEig {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns match values
};

inline JacobiEig jacobi_eigensolver(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        double theta = 0.5 * (a(q, q) - a(p, p)) / a(p, q);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        Eigen::VectorXd ap = a.col(p), aq = a.col(q);
        a.col(p) = c * ap - s * aq;
        a.col(q) = s * ap + c * aq;
        Eigen::VectorXd rp = a.row(p), rq = a.row(q);
        a.row(p) = c * rp.transpose() - s * rq.transpose();
        a.row(q) = s * rp.transpose() + c * rq.transpose();
        Eigen::VectorXd vp = v.col(p), vq = v.col(q);
        v.col(p) = c * vp - s * vq;
        v.col(q) = s * vp + c * vq;
      }
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) < a(j, j); });
  JacobiEig out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Squared Grassmann distance between two explicit column spans, computed
// from scratch (dense products only).
inline double subspace_distance_sq(const Eigen::MatrixXd& y,
                                   const Eigen::MatrixXd& z) {
  Eigen::MatrixXd g = y.transpose() * z;
  return static_cast<double>(y.cols()) - g.squaredNorm();
}

inline Eigen::MatrixXd dense_adjacency(const Graph& g) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(g.node_count(), g.node_count());
  for (const Edge& e : g.edges()) {
    w(e.u, e.v) = e.w;
    w(e.v, e.u) = e.w;
  }
  return w;
}

inline Eigen::MatrixXd dense_laplacian(const Graph& g) {
  Eigen::MatrixXd w = dense_adjacency(g);
  Eigen::VectorXd deg = w.rowwise().sum();
  Eigen::MatrixXd l = -w;
  l.diagonal() = deg;
  return l;
}

// Renormalization oracle evaluated directly from the formula.
inline Eigen::MatrixXd dense_renormalized(const Graph& g) {
  const int n = g.node_count();
  Eigen::MatrixXd wt = dense_adjacency(g) + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd dinv = wt.rowwise().sum().array().rsqrt();
  return dinv.asDiagonal() * wt * dinv.asDiagonal();
}

inline int component_count(const Graph& g) {
  std::vector<int> parent(static_cast<std::size_t>(g.node_count()));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const Edge& e : g.edges()) {
    int a = find(e.u), b = find(e.v);
    if (a != b) parent[static_cast<std::size_t>(a)] = b;
  }
  int count = 0;
  for (int i = 0; i < g.node_count(); ++i)
    if (find(i) == i) ++count;
  return count;
}

inline Graph random_graph(int n, double edge_prob, std::uint64_t seed,
                          bool weighted = true) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < edge_prob)
        edges.push_back({u, v, weighted ? rng.uniform(0.1, 2.0) : 1.0});
  return Graph::from_edges(n, std::move(edges));
}

inline Eigen::MatrixXd random_orthonormal(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd a(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
}

inline Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  std::vector<Edge> edges;
  edges.reserve(g.edge_count());
  for (const Edge& e : g.edges())
    edges.push_back({perm[static_cast<std::size_t>(e.u)],
                     perm[static_cast<std::size_t>(e.v)], e.w});
  return Graph::from_edges(g.node_count(), std::move(edges));
}

// Brute-force minimizer of (beta.a - alpha*c)^2 + ridge ||beta - 1/m||^2
// over a simplex grid. m = 2 walks beta_1; m = 3 walks a triangular grid.
struct GridSearchResult {
  Eigen::VectorXd beta;
  double objective = 0.0;
};

inline double gamma_objective(const Eigen::VectorXd& beta,
                              const Eigen::VectorXd& a, double c, double alpha,
                              double ridge) {
  const double m = static_cast<double>(beta.size());
  double t = beta.dot(a) - alpha * c;
  double reg = (beta.array() - 1.0 / m).matrix().squaredNorm();
  return t * t + ridge * reg;
}

inline GridSearchResult grid_search_weights(const Eigen::VectorXd& a, double c,
                                            double alpha, double ridge,
                                            double step) {
  const int m = static_cast<int>(a.size());
  GridSearchResult best;
  best.objective = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::VectorXd& beta) {
    double obj = gamma_objective(beta, a, c, alpha, ridge);
    if (obj < best.objective) {
      best.objective = obj;
      best.beta = beta;
    }
  };
  if (m == 1) {
    consider(Eigen::VectorXd::Ones(1));
  } else if (m == 2) {
    for (double b0 = 0.0; b0 <= 1.0 + 1e-12; b0 += step) {
      Eigen::VectorXd beta(2);
      beta << std::min(b0, 1.0), 1.0 - std::min(b0, 1.0);
      consider(beta);
    }
  } else {
    for (double b0 = 0.0; b0 <= 1.0 + 1e-12; b0 += step) {
      for (double b1 = 0.0; b0 + b1 <= 1.0 + 1e-12; b1 += step) {
        Eigen::VectorXd beta(3);
        beta << std::min(b0, 1.0), std::min(b1, 1.0 - std::min(b0, 1.0)),
            std::max(1.0 - b0 - b1, 0.0);
        consider(beta);
      }
    }
  }
  return best;
}

}  // namespace testsupport

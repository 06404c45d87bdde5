#include "graphfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace graphfuse {

namespace {

void validate_config(const FusionConfig& cfg) {
  if (cfg.alpha <= 0.0)
    throw std::invalid_argument("fusion: alpha must be > 0");
  if (cfg.iterations < 1)
    throw std::invalid_argument("fusion: iteration count must be >= 1");
  if (cfg.k < 1) throw std::invalid_argument("fusion: k must be >= 1");
  if (cfg.ridge_eps < 0.0)
    throw std::invalid_argument("fusion: ridge_eps must be >= 0");
}

void validate_views(const std::vector<Graph>& graphs) {
  if (graphs.empty())
    throw std::invalid_argument("fusion: at least one view is required");
  for (const Graph& g : graphs)
    if (g.node_count() != graphs.front().node_count())
      throw std::invalid_argument("fusion: views disagree on node count");
}

void validate_laplacians(const SpectralEmbedding& Y,
                         const std::vector<Laplacian>& laplacians) {
  if (laplacians.empty())
    throw std::invalid_argument("fusion: at least one view is required");
  for (const Laplacian& lap : laplacians)
    if (lap.n != Y.n) throw std::invalid_argument("fusion: Laplacian size mismatch");
}

void validate_embeddings(const SpectralEmbedding& Y,
                         const std::vector<SpectralEmbedding>& views) {
  if (views.empty())
    throw std::invalid_argument("fusion: at least one view is required");
  for (const SpectralEmbedding& v : views)
    if (v.n != Y.n || v.k != Y.k)
      throw std::invalid_argument("fusion: embedding shape mismatch");
}

void validate_simplex(const Eigen::VectorXd& beta) {
  if (beta.size() == 0)
    throw std::invalid_argument("fusion: empty weight vector");
  if (std::abs(beta.sum() - 1.0) > 1e-8 || beta.minCoeff() < -1e-12)
    throw std::invalid_argument("fusion: weights must lie on the simplex");
}

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_simplex(Eigen::VectorXd v) {
  const int m = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int j = 0; j < m; ++j) {
    cum += u[j];
    double t = (cum - 1.0) / (j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  for (int i = 0; i < m; ++i) v(i) = std::max(v(i) - tau, 0.0);
  return v;
}

struct GammaProblem {
  Eigen::VectorXd a;  // a_i = tr(Y^T L_i Y)
  double c = 0.0;     // sum_i tr(Y Y^T Y_i Y_i^T)
};

GammaProblem gamma_problem(const SpectralEmbedding& Y,
                           const std::vector<Laplacian>& laplacians,
                           const std::vector<SpectralEmbedding>& views) {
  GammaProblem p;
  const auto m = static_cast<int>(laplacians.size());
  p.a.resize(m);
  for (int i = 0; i < m; ++i)
    p.a(i) = (Y.Y.transpose() * (laplacians[i].matrix * Y.Y)).trace();
  for (int i = 0; i < m; ++i)
    p.c += (views[i].Y.transpose() * Y.Y).squaredNorm();
  return p;
}

// Projected gradient descent for
//   min (beta.a - alpha c)^2 + ridge ||beta - 1/m||^2
// over the simplex, optionally descending on alpha within [1e-4, 10].
std::pair<Eigen::VectorXd, double> minimize_gamma(const GammaProblem& p,
                                                  double alpha, double ridge,
                                                  bool optimize_alpha) {
  const int m = static_cast<int>(p.a.size());
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(m, 1.0 / m);
  if (m == 1 && !optimize_alpha) return {Eigen::VectorXd::Ones(1), alpha};

  constexpr double kAlphaLo = 1e-4, kAlphaHi = 10.0;
  double lip = 2.0 * (p.a.squaredNorm() + (optimize_alpha ? p.c * p.c : 0.0)) +
               2.0 * ridge;
  if (lip <= 0.0) return {uniform, alpha};
  const double step = 1.0 / lip;

  Eigen::VectorXd beta = uniform;
  for (int it = 0; it < 10000; ++it) {
    double t = beta.dot(p.a) - alpha * p.c;
    Eigen::VectorXd grad = 2.0 * t * p.a + 2.0 * ridge * (beta - uniform);
    Eigen::VectorXd next = project_simplex(beta - step * grad);
    double alpha_next = alpha;
    if (optimize_alpha)
      alpha_next = std::clamp(alpha - step * (-2.0 * t * p.c), kAlphaLo, kAlphaHi);
    double delta = (next - beta).cwiseAbs().maxCoeff();
    delta = std::max(delta, std::abs(alpha_next - alpha));
    beta = next;
    alpha = alpha_next;
    if (delta <= 1e-10) break;
  }
  for (int i = 0; i < m; ++i) beta(i) = std::max(beta(i), 0.0);
  return {beta, alpha};
}

// Union of view edges combined as w_1 + sum_i beta_i (w_i - w_1). Identical
// views cancel exactly, so the combination reproduces a common view bit for
// bit regardless of beta.
Graph convex_combine(const std::vector<Graph>& graphs,
                     const Eigen::VectorXd& beta) {
  const int m = static_cast<int>(graphs.size());
  const int n = graphs.front().node_count();
  std::vector<std::pair<int, int>> keys;
  for (const Graph& g : graphs)
    for (const Edge& e : g.edges()) keys.emplace_back(e.u, e.v);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::vector<std::vector<double>> w(m, std::vector<double>(keys.size(), 0.0));
  for (int i = 0; i < m; ++i)
    for (const Edge& e : graphs[i].edges()) {
      auto it = std::lower_bound(keys.begin(), keys.end(),
                                 std::make_pair(e.u, e.v));
      w[i][static_cast<std::size_t>(it - keys.begin())] = e.w;
    }

  std::vector<Edge> edges;
  edges.reserve(keys.size());
  for (std::size_t j = 0; j < keys.size(); ++j) {
    double value = w[0][j];
    for (int i = 0; i < m; ++i) value += beta(i) * (w[i][j] - w[0][j]);
    value = std::max(value, 0.0);
    if (value > 0.0) edges.push_back({keys[j].first, keys[j].second, value});
  }
  return Graph::from_edges(n, std::move(edges));
}

Graph graph_sum(const Graph& a, const Graph& b) {
  std::vector<Edge> edges = a.edges();
  edges.insert(edges.end(), b.edges().begin(), b.edges().end());
  return Graph::from_edges(a.node_count(), std::move(edges));
}

Eigen::MatrixXd stack_view_bases(const std::vector<SpectralEmbedding>& views) {
  const int n = views.front().n;
  const int k = views.front().k;
  Eigen::MatrixXd U(n, static_cast<int>(views.size()) * k);
  for (std::size_t i = 0; i < views.size(); ++i)
    U.middleCols(static_cast<int>(i) * k, k) = views[i].Y;
  return U;
}

}  // namespace

double specificity_loss(const SpectralEmbedding& Y,
                        const std::vector<Laplacian>& laplacians,
                        const FusionWeights& beta) {
  validate_laplacians(Y, laplacians);
  if (beta.beta.size() != static_cast<Eigen::Index>(laplacians.size()))
    throw std::invalid_argument("specificity_loss: weight count mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < laplacians.size(); ++i)
    loss += beta.beta(static_cast<Eigen::Index>(i)) *
            (Y.Y.transpose() * (laplacians[i].matrix * Y.Y)).trace();
  return loss;
}

double commonality_loss(const SpectralEmbedding& Y,
                        const std::vector<SpectralEmbedding>& views) {
  validate_embeddings(Y, views);
  double acc = 0.0;
  for (const SpectralEmbedding& v : views)
    acc += (v.Y.transpose() * Y.Y).squaredNorm();
  return -acc;
}

SpectralEmbedding fuse_embedding(const FusionWeights& beta, double alpha,
                                 const std::vector<Laplacian>& laplacians,
                                 const std::vector<SpectralEmbedding>& views,
                                 int k, const EigOptions& opts) {
  if (alpha <= 0.0) throw std::invalid_argument("fuse_embedding: alpha must be > 0");
  validate_simplex(beta.beta);
  if (laplacians.size() != views.size() || laplacians.empty())
    throw std::invalid_argument("fuse_embedding: view count mismatch");
  if (beta.beta.size() != static_cast<Eigen::Index>(laplacians.size()))
    throw std::invalid_argument("fuse_embedding: weight count mismatch");
  const int n = laplacians.front().n;
  for (const SpectralEmbedding& v : views)
    if (v.n != n || v.k != views.front().k)
      throw std::invalid_argument("fuse_embedding: embedding shape mismatch");

  SpMat S = beta.beta(0) * laplacians[0].matrix;
  for (std::size_t i = 1; i < laplacians.size(); ++i)
    S = S + SpMat(beta.beta(static_cast<Eigen::Index>(i)) * laplacians[i].matrix);
  return smallest_eigenpairs(S, stack_view_bases(views), -alpha, k, opts);
}

FusionWeights optimize_weights(const SpectralEmbedding& Y,
                               const std::vector<Laplacian>& laplacians,
                               const std::vector<SpectralEmbedding>& views,
                               double alpha, double ridge_eps) {
  validate_laplacians(Y, laplacians);
  validate_embeddings(Y, views);
  if (laplacians.size() != views.size())
    throw std::invalid_argument("optimize_weights: view count mismatch");
  if (ridge_eps < 0.0)
    throw std::invalid_argument("optimize_weights: ridge_eps must be >= 0");
  auto [beta, a] = minimize_gamma(gamma_problem(Y, laplacians, views), alpha,
                                  ridge_eps, false);
  (void)a;
  return FusionWeights{std::move(beta)};
}

FusionResult structure_fusion(const std::vector<Graph>& graphs,
                              const FusionConfig& cfg) {
  validate_config(cfg);
  validate_views(graphs);
  const int m = static_cast<int>(graphs.size());
  const int n = graphs.front().node_count();
  if (cfg.k > n)
    throw std::invalid_argument("structure_fusion: k exceeds node count");

  std::vector<Laplacian> laplacians;
  std::vector<SpectralEmbedding> views;
  laplacians.reserve(m);
  views.reserve(m);
  for (const Graph& g : graphs) {
    laplacians.push_back(build_laplacian(g));
    views.push_back(smallest_eigenpairs(laplacians.back(), cfg.k, cfg.eig));
  }

  FusionResult result;
  result.alpha = cfg.alpha;
  result.weights.beta = Eigen::VectorXd::Constant(m, 1.0 / m);

  const bool ablation = cfg.loss_mode == LossMode::commonality_only;
  SpMat zero(n, n);
  Eigen::MatrixXd U = stack_view_bases(views);

  for (int t = 0; t < cfg.iterations; ++t) {
    if (ablation) {
      result.embedding =
          smallest_eigenpairs(zero, U, -result.alpha, cfg.k, cfg.eig);
    } else {
      result.embedding = fuse_embedding(result.weights, result.alpha,
                                        laplacians, views, cfg.k, cfg.eig);
      auto [beta, alpha] =
          minimize_gamma(gamma_problem(result.embedding, laplacians, views),
                         result.alpha, cfg.ridge_eps,
                         cfg.alpha_mode == AlphaMode::optimized);
      result.weights.beta = std::move(beta);
      result.alpha = alpha;
    }
    FusionIterationLoss rec;
    rec.specificity =
        specificity_loss(result.embedding, laplacians, result.weights);
    rec.commonality = commonality_loss(result.embedding, views);
    double trace_value = rec.specificity + result.alpha * rec.commonality;
    rec.squared_objective = trace_value * trace_value;
    result.loss_trace.push_back(rec);
  }

  result.fused = convex_combine(graphs, result.weights.beta);
  return result;
}

Graph propagation_fusion(const std::vector<Graph>& graphs,
                         const FusionConfig& cfg) {
  validate_views(graphs);
  if (graphs.size() == 1) return graphs.front();

  SpMat product = graphs.front().adjacency();
  for (std::size_t i = 1; i < graphs.size(); ++i)
    product = SpMat(product * graphs[i].adjacency());
  SpMat sym = SpMat(0.5 * (SpMat(product.transpose()) + product));

  std::vector<Edge> edges;
  for (int c = 0; c < sym.outerSize(); ++c)
    for (SpMat::InnerIterator it(sym, c); it; ++it) {
      if (it.row() < it.col() && it.value() != 0.0)
        edges.push_back({static_cast<int>(it.row()),
                         static_cast<int>(it.col()), it.value()});
    }
  if (cfg.pf_scale_mode == PfScaleMode::max_normalize && !edges.empty()) {
    double max_w = 0.0;
    for (const Edge& e : edges) max_w = std::max(max_w, e.w);
    if (max_w > 0.0)
      for (Edge& e : edges) e.w /= max_w;
  }
  return Graph::from_edges(graphs.front().node_count(), std::move(edges));
}

FusionResult structure_propagation_fusion(const std::vector<Graph>& graphs,
                                          const FusionConfig& cfg) {
  FusionResult result = structure_fusion(graphs, cfg);
  result.fused = graph_sum(result.fused, propagation_fusion(graphs, cfg));
  return result;
}

}  // namespace graphfuse

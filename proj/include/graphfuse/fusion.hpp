#pragma once

#include <Eigen/Core>

#include <vector>

#include "graphfuse/graph.hpp"
#include "graphfuse/spectral.hpp"

namespace graphfuse {

enum class AlphaMode { fixed, optimized };
enum class LossMode { full, commonality_only };
enum class PfScaleMode { max_normalize, raw };

struct FusionConfig {
  double alpha = 0.5;
  AlphaMode alpha_mode = AlphaMode::fixed;
  int iterations = 5;  // alternating optimization steps T
  int k = 2;           // embedding dimension
  LossMode loss_mode = LossMode::full;
  double ridge_eps = 1e-8;  // tie-break pull toward the uniform weights
  PfScaleMode pf_scale_mode = PfScaleMode::max_normalize;
  EigOptions eig;
};

// Convex weights over the views: beta >= 0, sum(beta) = 1.
struct FusionWeights {
  Eigen::VectorXd beta;
};

struct FusionIterationLoss {
  double specificity = 0.0;
  double commonality = 0.0;       // constant term km removed, so <= 0
  double squared_objective = 0.0;  // (specificity + alpha * commonality)^2
};

struct FusionResult {
  Graph fused;
  FusionWeights weights;
  double alpha = 0.0;
  SpectralEmbedding embedding;
  std::vector<FusionIterationLoss> loss_trace;
};

// tr(Y^T (sum_i beta_i L_i) Y); nonnegative for PSD Laplacians.
double specificity_loss(const SpectralEmbedding& Y,
                        const std::vector<Laplacian>& laplacians,
                        const FusionWeights& beta);

// -sum_i tr(Y Y^T Y_i Y_i^T), i.e. sum_i d^2(Y, Y_i) - k*m; in [-km, 0].
double commonality_loss(const SpectralEmbedding& Y,
                        const std::vector<SpectralEmbedding>& views);

// k smallest eigenvectors of M = sum_i beta_i L_i - alpha sum_i Y_i Y_i^T.
SpectralEmbedding fuse_embedding(const FusionWeights& beta, double alpha,
                                 const std::vector<Laplacian>& laplacians,
                                 const std::vector<SpectralEmbedding>& views,
                                 int k, const EigOptions& opts = {});

// Simplex-constrained minimizer of (sum_i beta_i a_i - alpha c)^2 with a
// vanishing ridge pull toward uniform weights, a_i = tr(Y^T L_i Y) and
// c = sum_i tr(Y Y^T Y_i Y_i^T). Projected gradient descent.
FusionWeights optimize_weights(const SpectralEmbedding& Y,
                               const std::vector<Laplacian>& laplacians,
                               const std::vector<SpectralEmbedding>& views,
                               double alpha, double ridge_eps);

// Alternating optimization of the fused embedding and the view weights;
// returns W = sum_i beta_i W_i together with the embedding and loss trace.
FusionResult structure_fusion(const std::vector<Graph>& graphs,
                              const FusionConfig& cfg);

// W = prod_i W_i in view order, symmetrized, diagonal zeroed, optionally
// rescaled so the maximum entry is 1. A single view passes through unchanged.
Graph propagation_fusion(const std::vector<Graph>& graphs,
                         const FusionConfig& cfg);

// W = sum_i beta_i W_i + prod_i W_i (beta from structure_fusion).
FusionResult structure_propagation_fusion(const std::vector<Graph>& graphs,
                                          const FusionConfig& cfg);

}  // namespace graphfuse

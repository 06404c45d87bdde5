#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "graphfuse/graph.hpp"

namespace graphfuse {

// Orthonormal basis of the k smallest-eigenvalue eigenvectors of a symmetric
// operator. Columns are sign-normalized: the largest-magnitude entry of each
// column is positive (first such entry on ties). For degenerate eigenvalues
// the basis is any orthonormal basis of the invariant subspace, so consumers
// must depend on Y*Y^T only, never on individual columns.
struct SpectralEmbedding {
  int n = 0;
  int k = 0;
  Eigen::MatrixXd Y;
  Eigen::VectorXd eigenvalues;  // ascending
};

struct EigOptions {
  int dense_cutoff = 3000;   // full dense solve at or below this size
  double tol = 1e-8;         // residual tolerance, relative to ||A||
  int max_iterations = 600;  // shift-inverted subspace iterations
  std::uint64_t seed = 0x6A09E667F3BCC909ULL;
};

SpectralEmbedding smallest_eigenpairs(const Eigen::MatrixXd& symmetric, int k);

SpectralEmbedding smallest_eigenpairs(const Laplacian& lap, int k,
                                      const EigOptions& opts = {});

// Smallest eigenpairs of S + c * U * U^T without forming the dense matrix
// (above the dense cutoff). S must be symmetric with eigenvalues bounded
// below by its Gershgorin estimate; U may have zero columns.
SpectralEmbedding smallest_eigenpairs(const SpMat& S, const Eigen::MatrixXd& U,
                                      double c, int k,
                                      const EigOptions& opts = {});

SpectralEmbedding spectral_embedding(const Graph& g, int k,
                                     const EigOptions& opts = {});

// Squared Grassmann distance d^2 = k - ||Y^T Z||_F^2, in [0, k].
// Exactly symmetric in its arguments.
double grassmann_distance_sq(const SpectralEmbedding& a,
                             const SpectralEmbedding& b);

}  // namespace graphfuse

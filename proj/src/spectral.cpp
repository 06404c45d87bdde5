#include "graphfuse/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "graphfuse/errors.hpp"
#include "graphfuse/rng.hpp"

namespace graphfuse {

namespace {

void sign_normalize(Eigen::MatrixXd& Y) {
  for (int j = 0; j < Y.cols(); ++j) {
    int at = 0;
    double best = -1.0;
    for (int i = 0; i < Y.rows(); ++i) {
      double a = std::abs(Y(i, j));
      if (a > best) {
        best = a;
        at = i;
      }
    }
    if (Y(at, j) < 0.0) Y.col(j) = -Y.col(j);
  }
}

SpectralEmbedding make_embedding(Eigen::MatrixXd Y, Eigen::VectorXd values) {
  sign_normalize(Y);
  SpectralEmbedding e;
  e.n = static_cast<int>(Y.rows());
  e.k = static_cast<int>(Y.cols());
  e.Y = std::move(Y);
  e.eigenvalues = std::move(values);
  return e;
}

SpectralEmbedding dense_smallest(const Eigen::MatrixXd& A, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success)
    throw NumericError("dense eigensolver failed");
  return make_embedding(es.eigenvectors().leftCols(k),
                        es.eigenvalues().head(k));
}

// Gershgorin interval of a symmetric sparse matrix.
std::pair<double, double> gershgorin(const SpMat& S) {
  const int n = static_cast<int>(S.rows());
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off = Eigen::VectorXd::Zero(n);
  for (int c = 0; c < S.outerSize(); ++c)
    for (SpMat::InnerIterator it(S, c); it; ++it) {
      if (it.row() == it.col())
        diag(it.row()) = it.value();
      else
        off(it.row()) += std::abs(it.value());
    }
  double lo = 0.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    lo = std::min(lo, diag(i) - off(i));
    hi = std::max(hi, diag(i) + off(i));
  }
  return {lo, hi};
}

// Shift-inverted subspace iteration with Rayleigh-Ritz extraction for the
// smallest eigenpairs of A = S + c U U^T. The shifted system (S + sigma I)
// is factorized once; the low-rank term enters through the Woodbury identity.
SpectralEmbedding iterative_smallest(const SpMat& S, const Eigen::MatrixXd& U,
                                     double c, int k, const EigOptions& opts) {
  const int n = static_cast<int>(S.rows());
  const int r = static_cast<int>(U.cols());

  auto [lo, hi] = gershgorin(S);
  double lam_max_utu = 0.0;
  if (r > 0) {
    Eigen::MatrixXd utu = U.transpose() * U;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(utu);
    lam_max_utu = es.eigenvalues().maxCoeff();
  }
  const double norm_bound =
      std::max(std::abs(lo), std::abs(hi)) + std::abs(c) * lam_max_utu;
  const double res_scale = std::max(0.5 * norm_bound, 1e-30);
  const double margin = std::max(1e-3 * std::max(norm_bound, 1.0), 1e-12);
  const double sigma =
      std::max(0.0, -lo) + std::max(0.0, -c) * lam_max_utu + margin;

  SpMat K = S;
  SpMat eye(n, n);
  eye.setIdentity();
  K = K + SpMat(sigma * eye);
  Eigen::SimplicialLDLT<SpMat> ldlt(K);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("shifted factorization failed");

  Eigen::MatrixXd PU;
  Eigen::LDLT<Eigen::MatrixXd> inner;
  if (r > 0) {
    PU = ldlt.solve(U);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(r, r) + c * (U.transpose() * PU);
    m = 0.5 * (m + m.transpose()).eval();
    inner.compute(m);
    if (inner.info() != Eigen::Success)
      throw NumericError("low-rank correction is singular");
  }

  auto apply = [&](const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
    Eigen::MatrixXd y = S * X;
    if (r > 0) y.noalias() += c * (U * (U.transpose() * X));
    return y;
  };
  auto solve_shifted = [&](const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
    Eigen::MatrixXd z = ldlt.solve(B);
    if (r > 0) z.noalias() -= PU * (c * inner.solve(U.transpose() * z));
    return z;
  };

  const int block = std::min(n, k + std::max(4, k));
  Rng rng(opts.seed);
  Eigen::MatrixXd Q(n, block);
  for (int j = 0; j < block; ++j)
    for (int i = 0; i < n; ++i) Q(i, j) = rng.uniform(-1.0, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr0(Q);
  Q = qr0.householderQ() * Eigen::MatrixXd::Identity(n, block);

  for (int it = 0; it < opts.max_iterations; ++it) {
    Eigen::MatrixXd Z = solve_shifted(Q);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);

    Eigen::MatrixXd AQ = apply(Q);
    Eigen::MatrixXd T = Q.transpose() * AQ;
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(T);
    Eigen::MatrixXd ritz = Q * small.eigenvectors();
    Eigen::MatrixXd Aritz = AQ * small.eigenvectors();

    bool converged = true;
    for (int j = 0; j < k; ++j) {
      double res =
          (Aritz.col(j) - small.eigenvalues()(j) * ritz.col(j)).norm();
      if (res > opts.tol * res_scale) {
        converged = false;
        break;
      }
    }
    if (converged)
      return make_embedding(ritz.leftCols(k), small.eigenvalues().head(k));
    Q = ritz;
  }

  if (n <= 4000) {
    Eigen::MatrixXd A = Eigen::MatrixXd(S);
    if (r > 0) A.noalias() += c * (U * U.transpose());
    A = 0.5 * (A + A.transpose()).eval();
    return dense_smallest(A, k);
  }
  throw NumericError("iterative eigensolver did not converge");
}

void check_k(int k, int n) {
  if (k < 1 || k > n)
    throw std::invalid_argument("smallest_eigenpairs: k must satisfy 1 <= k <= n");
}

}  // namespace

SpectralEmbedding smallest_eigenpairs(const Eigen::MatrixXd& symmetric, int k) {
  const int n = static_cast<int>(symmetric.rows());
  if (symmetric.cols() != n)
    throw std::invalid_argument("smallest_eigenpairs: matrix must be square");
  check_k(k, n);
  double scale = std::max(1.0, symmetric.cwiseAbs().maxCoeff());
  double asym = (symmetric - symmetric.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale)
    throw std::invalid_argument("smallest_eigenpairs: input is not symmetric");
  return dense_smallest(symmetric, k);
}

SpectralEmbedding smallest_eigenpairs(const Laplacian& lap, int k,
                                      const EigOptions& opts) {
  check_k(k, lap.n);
  if (lap.n <= opts.dense_cutoff)
    return dense_smallest(Eigen::MatrixXd(lap.matrix), k);
  return iterative_smallest(lap.matrix, Eigen::MatrixXd(lap.n, 0), 0.0, k,
                            opts);
}

SpectralEmbedding smallest_eigenpairs(const SpMat& S, const Eigen::MatrixXd& U,
                                      double c, int k, const EigOptions& opts) {
  const int n = static_cast<int>(S.rows());
  if (S.cols() != n)
    throw std::invalid_argument("smallest_eigenpairs: matrix must be square");
  if (U.size() > 0 && U.rows() != n)
    throw std::invalid_argument("smallest_eigenpairs: U row count mismatch");
  check_k(k, n);
  if (n <= opts.dense_cutoff) {
    Eigen::MatrixXd A = Eigen::MatrixXd(S);
    if (U.cols() > 0) A.noalias() += c * (U * U.transpose());
    A = 0.5 * (A + A.transpose()).eval();
    return dense_smallest(A, k);
  }
  return iterative_smallest(S, U, c, k, opts);
}

SpectralEmbedding spectral_embedding(const Graph& g, int k,
                                     const EigOptions& opts) {
  return smallest_eigenpairs(build_laplacian(g), k, opts);
}

double grassmann_distance_sq(const SpectralEmbedding& a,
                             const SpectralEmbedding& b) {
  if (a.n != b.n || a.k != b.k)
    throw std::invalid_argument("grassmann_distance_sq: shape mismatch");
  // Entries of G = Y_a^T Y_b are accumulated explicitly and summed over
  // unordered index pairs, so the result is bit-identical when the arguments
  // swap (G becomes G^T).
  auto gram = [&](int i, int j) {
    double s = 0.0;
    for (int t = 0; t < a.n; ++t) s += a.Y(t, i) * b.Y(t, j);
    return s;
  };
  double acc = 0.0;
  for (int i = 0; i < a.k; ++i) {
    double gii = gram(i, i);
    acc += gii * gii;
    for (int j = i + 1; j < a.k; ++j) {
      double gij = gram(i, j);
      double gji = gram(j, i);
      acc += gij * gij + gji * gji;
    }
  }
  double d2 = static_cast<double>(a.k) - acc;
  return std::clamp(d2, 0.0, static_cast<double>(a.k));
}

}  // namespace graphfuse

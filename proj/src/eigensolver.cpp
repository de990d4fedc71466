#include "critlab/eigensolver.hpp"

#include "critlab/elliptic.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>

namespace critlab {

namespace {

Vec residual_norms(const SpMat& K, const Vec& m, const Vec& vals, const Eigen::MatrixXd& X) {
  Vec res(vals.size());
  for (Eigen::Index j = 0; j < vals.size(); ++j) {
    Vec r = K * X.col(j) - vals[j] * m.cwiseProduct(X.col(j));
    res[j] = std::sqrt(r.cwiseAbs2().cwiseQuotient(m).sum()) / std::abs(vals[j]);
  }
  return res;
}

// Inverse form: with K = L L^T, the eigenvalues of L^{-1} M L^{-T} are 1/lambda, so the low end
// of the spectrum is the well-conditioned top end here.
EigenPairs dense_solve(const SpMat& K, const Vec& m, int count) {
  const Eigen::Index N = K.rows();
  Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(K)};
  if (llt.info() != Eigen::Success) throw SolverFailure("dense stiffness factorization failed", NAN);
  Eigen::MatrixXd Li = llt.matrixL().solve(Eigen::MatrixXd::Identity(N, N));
  Eigen::MatrixXd B = Li * m.asDiagonal() * Li.transpose();
  B = 0.5 * (B + B.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  if (es.info() != Eigen::Success) throw SolverFailure("dense eigensolver failed", NAN);
  const int k = static_cast<int>(std::min<Eigen::Index>(count, N));
  EigenPairs out;
  out.dense = true;
  out.values.resize(k);
  out.vectors.resize(N, k);
  for (int j = 0; j < k; ++j) {
    const double mu = es.eigenvalues()[N - 1 - j];
    out.values[j] = 1.0 / mu;
    out.vectors.col(j) = Li.transpose() * es.eigenvectors().col(N - 1 - j) / std::sqrt(mu);
  }
  out.residuals = residual_norms(K, m, out.values, out.vectors);
  return out;
}

// M-orthonormalize the columns of X in place (two passes of modified Gram-Schmidt).
void m_orthonormalize(Eigen::MatrixXd& X, const Vec& m) {
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      for (Eigen::Index i = 0; i < j; ++i) {
        double c = X.col(i).dot(m.cwiseProduct(X.col(j)));
        X.col(j) -= c * X.col(i);
      }
      double nrm = std::sqrt(X.col(j).dot(m.cwiseProduct(X.col(j))));
      if (nrm > 0) X.col(j) /= nrm;
    }
}

EigenPairs subspace_iteration(const SpMat& K, const Vec& m, int count, const EigenOptions& opts) {
  const Eigen::Index N = K.rows();
  if (N < opts.dense_limit) return dense_solve(K, m, count);

  // Shift-invert subspace iteration at shift 0 with Rayleigh-Ritz on the block.
  Eigen::SimplicialLLT<SpMat> llt(K);
  if (llt.info() != Eigen::Success) throw SolverFailure("stiffness factorization failed", NAN);
  const int b = std::min<int>(static_cast<int>(N), count + opts.extra_block);
  std::mt19937 rng(opts.seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(N, b);
  for (Eigen::Index i = 0; i < N; ++i)
    for (int j = 0; j < b; ++j) X(i, j) = nd(rng);
  m_orthonormalize(X, m);

  EigenPairs out;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Eigen::MatrixXd Z = llt.solve(m.asDiagonal() * X);
    m_orthonormalize(Z, m);
    Eigen::MatrixXd Kz = Z.transpose() * (K * Z);
    Kz = 0.5 * (Kz + Kz.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Kz);
    X = Z * es.eigenvectors();
    Vec vals = es.eigenvalues();
    Vec res = residual_norms(K, m, vals.head(count), X.leftCols(count));
    out.iterations = it;
    if (res.maxCoeff() < opts.tol || it == opts.max_iterations) {
      out.values = vals.head(count);
      out.vectors = X.leftCols(count);
      out.residuals = res;
      if (res.maxCoeff() >= opts.tol && res.maxCoeff() > 1e3 * opts.tol)
        throw SolverFailure("eigen iteration did not converge", res.maxCoeff());
      return out;
    }
  }
  return out;
}

}  // namespace

// The problem is solved for D K D and D M D with D = diag(K)^{-1/2}; eigenvalues, M-normalized
// vectors and the M^{-1} residual norms are unchanged by the congruence.
EigenPairs lowest_eigenpairs(const SpMat& K, const Vec& m, int count, const EigenOptions& opts) {
  if (count < 1) throw InvalidParameter("eigen count must be positive");
  const Vec d = K.diagonal().cwiseSqrt().cwiseInverse();
  const SpMat Ks = d.asDiagonal() * K * d.asDiagonal();
  EigenPairs out = subspace_iteration(Ks, m.cwiseProduct(d).cwiseProduct(d), count, opts);
  out.vectors = d.asDiagonal() * out.vectors;
  return out;
}

int count_below(const SpMat& K, const Vec& m, double tau) {
  // Congruence with D = diag(K)^{-1/2} keeps the inertia and tames the scale range.
  const Vec sc = K.diagonal().cwiseSqrt().cwiseInverse();
  SpMat A = sc.asDiagonal() * K * sc.asDiagonal();
  for (Eigen::Index k = 0; k < A.rows(); ++k) A.coeffRef(k, k) -= tau * m[k] * sc[k] * sc[k];
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolverFailure("LDLT factorization failed", NAN);
  const Vec& d = ldlt.vectorD();
  int neg = 0;
  for (Eigen::Index k = 0; k < d.size(); ++k)
    if (d[k] < 0) ++neg;
  return neg;
}

}  // namespace critlab

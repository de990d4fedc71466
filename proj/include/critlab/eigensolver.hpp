#pragma once

#include "critlab/grids.hpp"

#include <Eigen/Dense>

namespace critlab {

// Lowest eigenpairs of K x = lambda diag(m) x with K symmetric positive definite.
struct EigenPairs {
  Vec values;                 // ascending
  Eigen::MatrixXd vectors;    // columns normalized so that x^T diag(m) x = 1
  Vec residuals;              // ||K x - lambda M x||_{M^{-1}} / lambda
  int iterations = 0;
  bool dense = false;
};

struct EigenOptions {
  int dense_limit = 3000;     // dense solve below this many unknowns
  int max_iterations = 400;
  double tol = 1e-10;
  int extra_block = 6;        // guard vectors beyond the requested count
  unsigned seed = 12345;
};

EigenPairs lowest_eigenpairs(const SpMat& K, const Vec& mdiag, int count,
                             const EigenOptions& opts = {});

// Number of generalized eigenvalues strictly below tau (Sylvester inertia of K - tau M).
int count_below(const SpMat& K, const Vec& mdiag, double tau);

}  // namespace critlab

#pragma once

#include "critlab/grids.hpp"

#include <Eigen/SparseCholesky>

#include <memory>
#include <stdexcept>

namespace critlab {

class SolverFailure : public std::runtime_error {
public:
  SolverFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

struct PoissonSolution {
  GridFunction g;
  double residual_norm = 0.0;  // ||K g - W f|| / ||W f||
  double boundary_flux = 0.0;  // outflow through the Robin boundary
};

// Sparse Cholesky of the stiffness form of one grid sector.  Holds its own workspace; use
// one instance per thread.
class PoissonSolver {
public:
  PoissonSolver(std::shared_ptr<const Grid> grid, int sector, double tol = 1e-10);

  PoissonSolution solve(const GridFunction& f) const;
  // K^{-1} rhs for a dual vector rhs (already multiplied by weights).  The tolerance applies
  // to the residual of the diagonally equilibrated system.
  Vec solve_dual(const Vec& rhs) const;

  const Grid& grid() const { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
  int sector() const { return sector_; }
  const SpMat& stiffness() const { return *K_; }

private:
  std::shared_ptr<const Grid> grid_;
  int sector_;
  double tol_;
  const SpMat* K_;
  Eigen::SimplicialLLT<SpMat> llt_;  // of D K D with D = diag(K)^{-1/2}
  Vec scale_;
  Vec robin_diag_;
};

// Shared solver for (grid, sector); factorization is reused across calls.
std::shared_ptr<const PoissonSolver> poisson_solver(std::shared_ptr<const Grid> grid, int sector);

PoissonSolution poisson_solve(const GridFunction& f);

struct DualNorm {
  double norm = 0.0;          // ||grad g||
  double via_pairing = 0.0;   // (int f g)^{1/2}
  bool accuracy_warning = false;
};

DualNorm h_minus1(const GridFunction& f);
double h_minus1_norm(const GridFunction& f);
// L^{(2*)'} norm, (2*)' = 2n/(n+2).
double lq_dual_norm(const GridFunction& f);

}  // namespace critlab

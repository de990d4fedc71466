#include "critlab/elliptic.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace critlab {

PoissonSolver::PoissonSolver(std::shared_ptr<const Grid> grid, int sector, double tol)
    : grid_(std::move(grid)), sector_(sector), tol_(tol) {
  K_ = &grid_->stiffness(sector);
  // Symmetric diagonal equilibration: cell volumes span many decades on wide mapped grids.
  scale_ = K_->diagonal().cwiseSqrt().cwiseInverse();
  SpMat scaled = scale_.asDiagonal() * (*K_) * scale_.asDiagonal();
  llt_.compute(scaled);
  if (llt_.info() != Eigen::Success)
    throw SolverFailure("Cholesky factorization of the stiffness form failed", NAN);
  // Row sums of K cancel the interior couplings and leave centrifugal + Robin parts.
  Vec ones = Vec::Ones(grid_->size());
  Vec rows = (*K_) * ones;
  const int cf = grid_->centrifugal_factor(sector);
  const Vec& w = grid_->weights();
  const Vec& h = grid_->harmonic_radius();
  robin_diag_ = rows;
  if (cf != 0) robin_diag_ -= (cf * w.array() / (h.array() * h.array())).matrix();
}

Vec PoissonSolver::solve_dual(const Vec& rhs) const {
  const Vec b = scale_.cwiseProduct(rhs);
  const double bn = b.norm();
  if (bn == 0.0) return Vec::Zero(rhs.size());
  Vec x = scale_.cwiseProduct(llt_.solve(b));
  Vec r = scale_.cwiseProduct(rhs - (*K_) * x);
  double res = r.norm() / bn;
  for (int it = 0; it < 3 && res > tol_; ++it) {
    x += scale_.cwiseProduct(llt_.solve(r));
    r = scale_.cwiseProduct(rhs - (*K_) * x);
    res = r.norm() / bn;
  }
  if (!(res <= tol_)) throw SolverFailure("Poisson solve did not reach tolerance", res);
  return x;
}

PoissonSolution PoissonSolver::solve(const GridFunction& f) const {
  if (f.grid != grid_) throw InvalidParameter("Poisson solve: grid mismatch");
  if (f.sector != sector_) throw InvalidParameter("Poisson solve: sector mismatch");
  PoissonSolution sol;
  Vec rhs = grid_->weights().cwiseProduct(f.values);
  sol.g = f;
  sol.g.values = solve_dual(rhs);
  double bn = rhs.norm();
  sol.residual_norm = bn > 0.0 ? (rhs - (*K_) * sol.g.values).norm() / bn : 0.0;
  sol.boundary_flux = robin_diag_.dot(sol.g.values);
  return sol;
}

std::shared_ptr<const PoissonSolver> poisson_solver(std::shared_ptr<const Grid> grid, int sector) {
  struct Entry {
    std::weak_ptr<const Grid> grid;
    std::shared_ptr<const PoissonSolver> solver;
  };
  static std::mutex mu;
  static std::map<std::pair<const Grid*, int>, Entry> cache;
  std::lock_guard<std::mutex> lock(mu);
  for (auto it = cache.begin(); it != cache.end();) {
    if (it->second.grid.expired())
      it = cache.erase(it);
    else
      ++it;
  }
  auto key = std::make_pair(grid.get(), sector);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second.solver;
  auto solver = std::make_shared<const PoissonSolver>(grid, sector);
  cache[key] = Entry{grid, solver};
  return solver;
}

PoissonSolution poisson_solve(const GridFunction& f) {
  return poisson_solver(f.grid, f.sector)->solve(f);
}

DualNorm h_minus1(const GridFunction& f) {
  DualNorm out;
  if (f.values.squaredNorm() == 0.0) return out;
  PoissonSolution sol = poisson_solve(f);
  double energy = sol.g.values.dot(f.grid->stiffness(f.sector) * sol.g.values);
  double pairing = inner_L2(f, sol.g);
  out.norm = std::sqrt(std::max(energy, 0.0));
  out.via_pairing = std::sqrt(std::max(pairing, 0.0));
  out.accuracy_warning = std::abs(energy - pairing) > 0.01 * std::abs(energy);
  return out;
}

double h_minus1_norm(const GridFunction& f) { return h_minus1(f).norm; }

double lq_dual_norm(const GridFunction& f) {
  const int n = f.grid->n();
  return norm_Lq(f, 2.0 * n / (n + 2.0));
}

}  // namespace critlab

#pragma once

#include "critlab/fitting.hpp"
#include "critlab/spectral.hpp"
#include "critlab/stability.hpp"

#include <string>
#include <vector>

namespace critlab {

// f = (U+V)^p - U^p - V^p for U = U[-R e1, 1], V = U[R e1, 1].
GridFunction build_f(int n, double R, std::shared_ptr<const Grid> grid);
// f - omega sum_{psi in E} <f, psi>_{L^2} psi, with E orthonormal in L^2_omega.
GridFunction build_ftilde(const GridFunction& f, const Subspace& E);

struct RhoSolve {
  GridFunction rho;
  int iterations = 0;
  double relative_residual = 0.0;  // ||W^{-1}(b - A rho)||_{L^2} / ||ftilde||_{L^2}
  double min_gap = 0.0;            // smallest lambda_k - p over sector-0 pairs outside E
};

class SpectralGapError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Solves -Delta rho - p omega rho = ftilde on the L^2_omega complement of E (sector 0) by
// preconditioned conjugate gradients; K^{-1} preconditions and every iterate is projected
// off E.  sector0 supplies the eigenvalues used to confirm the gap.
RhoSolve solve_rho(const GridFunction& ftilde, const Subspace& E,
                   const SpectralDecomposition& sector0, double tol = 1e-12,
                   int max_iterations = 500);

// sum over pairs with lambda_k >= tau of <ftilde/omega, psi_k>_omega / (lambda_k - p) psi_k.
// Needs a complete decomposition; used as an independent check of solve_rho.
GridFunction rho_by_expansion(const GridFunction& ftilde, const SpectralDecomposition& full,
                              double tau);

double zeta(int n, double t);
double xi(int n, double t);

struct CounterexampleConfig {
  int ns = 256;
  int nr = 160;
  double extent_factor = 64.0;
  double core = 0.5;
  int radial_cells = 800;     // single-bubble grid for Lambda
  double solve_tol = 1e-12;
  bool fit = true;            // run the bubble fit for fitted_distance
  bool spectra_only = false;
};

struct CounterexampleNorms {
  double grad_rho = 0.0;
  double f_L2 = 0.0;
  double f_Hm1 = 0.0;
  double ftilde_Hm1 = 0.0;
  double f_minus_ftilde_dual = 0.0;
  double deficit_dual = 0.0;
  double deficit_h = 0.0;
  double grad_u_minus = 0.0;
  double grad_u_minus_identity = 0.0;  // int_{u<0} u^- Delta_h u
};

struct CounterexampleRun {
  int n = 0;
  double R = 0.0;
  bool positive_part = false;
  std::shared_ptr<const AxiGrid> grid;
  EpsilonGap gap;
  BuildEReport E;
  double dEF = 0.0;           // E against the discrete single-bubble eigenvectors
  double dEF_sampled = 0.0;   // E against the sampled closed-form generators
  GridFunction f, ftilde, rho;
  CounterexampleNorms norms;
  double zeta_of_rho = 0.0;
  double xi_of_rho = 0.0;
  double fitted_distance = 0.0;
  double projection_residual = 0.0;     // max_psi |<rho, psi>_omega| / ||rho||_omega
  double ftilde_orthogonality = 0.0;    // max_psi |<ftilde, psi>_{L^2}| / (||ftilde|| ||psi||)
  double pde_residual = 0.0;
  double min_gap = 0.0;
  int solve_iterations = 0;
  std::vector<double> F_coupling;       // |<grad psi, grad rho>| / ||grad rho||, psi in B_F sector 0
};

CounterexampleRun assemble_run(int n, double R, const CounterexampleConfig& cfg = {});
CounterexampleRun positive_part_run(const CounterexampleRun& run);

// Deficit residual of U + V + rho assembled without cancellation:
// (f - ftilde) + S^p[(1+y)^p - 1 - p y] + W^{-1}(b - A rho), y = rho/S.
GridFunction counterexample_residual(const CounterexampleRun& run);

struct ScalingFit {
  std::string quantity;
  std::vector<double> R;
  std::vector<double> values;
  ScalingModelFit fit;
  double reference_exponent = 0.0;
  double reference_log_power = 0.0;
  double exponent_error = 0.0;  // |fit.exponent - reference_exponent|
  bool has_reference = false;
};

// Reference exponents of ||f||_{L^2} and lower-bound exponents of ||f||_{H^-1}.
std::pair<double, double> f_L2_reference(int n);    // (exponent, log power)
std::pair<double, double> f_Hm1_reference(int n);

std::vector<ScalingFit> sweep_fits(const std::vector<CounterexampleRun>& runs);

struct SweepResult {
  std::vector<CounterexampleRun> runs;
  std::vector<ScalingFit> fits;
};

// Needs at least 4 R values; runs points sequentially or on `threads` workers.
SweepResult sweep(int n, const std::vector<double>& Rs, const CounterexampleConfig& cfg = {},
                  int threads = 1);

}  // namespace critlab

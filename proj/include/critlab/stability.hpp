#pragma once

#include "critlab/elliptic.hpp"
#include "critlab/grids.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace critlab {

// u = sum_i alpha_i U[z_i, lambda_i] + remainder.  Keeping the bubble part in closed form
// lets Laplacians and H^1 pairings of the bubbles be exact, so small remainders are not
// swamped by discretization error of the bubbles themselves.
struct Field {
  BubbleFamily bubbles;    // may have no members
  GridFunction remainder;  // sector 0

  std::shared_ptr<const Grid> grid() const { return remainder.grid; }
  int n() const { return remainder.grid->n(); }
};

Field field_from_grid(GridFunction u);
Field field_from_family(const BubbleFamily& fam, std::shared_ptr<const Grid> grid);
GridFunction sample_family(const BubbleFamily& fam, std::shared_ptr<const Grid> grid);
// -Delta sigma = sum alpha_i U_i^p, sampled.
GridFunction family_minus_laplacian(const BubbleFamily& fam, std::shared_ptr<const Grid> grid);
GridFunction to_grid(const Field& u);

BubbleFamily two_bubble_family(int n, double R, double alpha = 1.0);

// Max over pairs of min(l_i/l_j, l_j/l_i, 1/(l_i l_j |z_i - z_j|^2)) and of |alpha_i - 1|.
double delta_interaction(const BubbleFamily& family);
double pair_interaction(const BubbleParams& a, const BubbleParams& b);

struct Deficit {
  double h_minus1 = 0.0;
  double dual = 0.0;       // L^{(2*)'}
  GridFunction residual;   // Delta u + u|u|^{p-1}
};

GridFunction deficit_residual(const Field& u);
Deficit deficit(const Field& u);
Deficit deficit(const GridFunction& u);

struct FitOptions {
  int max_iterations = 200;
  double step_tol = 1e-10;
  double ortho_tol = 1e-8;
  double lambda_min = 1.0 / 64.0;
  double lambda_max = 64.0;
  double max_delta = 0.5;
};

class FitError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct FitResult {
  BubbleFamily family;
  GridFunction rho;                   // u - sigma
  double rho_h1 = 0.0;                // ||grad (u - sigma)||
  Eigen::MatrixXd ortho_residuals;    // (n+2) x nu; rows: U^p, U^{p-1} dU/dlambda, U^{p-1} dU/dz_j
  Eigen::MatrixXd ortho_cosines;      // same, normalized by ||rho||_{L^2*} ||.||_{L^(2*)'}
  Eigen::MatrixXd interaction_matrix; // int U_i^p U_j
  double delta_interaction = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Gauss-Newton projection in the H^1 seminorm over (alpha_i, z_i on the axis, log lambda_i).
// On the radial grid centers stay at the origin.
FitResult fit_bubbles(const Field& u, int nu, const BubbleFamily& init, const FitOptions& opts = {});

// ||grad(u - sigma)||^2 for given parameters; exposed for derivative checks.
double fit_objective(const Field& u, const BubbleFamily& sigma);
// Gradient of fit_objective in the parameter order (alpha_i, s_i, log lambda_i) per bubble;
// centers are skipped on the radial grid.
Vec fit_gradient(const Field& u, const BubbleFamily& sigma);

// H^1 forms <grad rho, grad U_i>, <grad rho, grad dU_i/dlambda>, <grad rho, grad dU_i/dz_1>
// evaluated with the discrete stiffness on sampled functions.
Eigen::MatrixXd h1_orthogonality(const FitResult& fit);

// p int sigma^{p-1} rho^2 / int |grad rho|^2; rho must satisfy the weighted orthogonality
// conditions to 1e-4 (cosine scale).
double spectral_quotient(const BubbleFamily& family, const GridFunction& rho);

struct StabilityReport {
  double distance = 0.0;
  double deficit_h = 0.0;
  double deficit_dual = 0.0;
  double ratio = 0.0;
  Eigen::MatrixXd interaction_bound_ratios;
  FitResult fit;
};

StabilityReport stability_report(const Field& u, int nu, const BubbleFamily& init,
                                 const FitOptions& opts = {});

// u = sigma + t psi with psi a high eigenfunction: the Lambda mode of U on a radial grid
// (nu = 1), or the first two-bubble sector-0 eigenfunction above p/(1-eps), made orthogonal to
// F (nu = 2).  psi is scaled to ||grad psi|| = ||grad sigma||.  For nu = 2 the separation starts
// at 10 and grows by sqrt(10) until the deficit of sigma alone is `interaction_margin` times
// smaller than the linear deficit of the smallest perturbation, or until max_R, beyond which
// the eigen residual floor of the two-focus grid passes 1e-3 for n = 3.
struct PerturbationConfig {
  int radial_cells = 800;
  int ns = 128;
  int nr = 96;
  double interaction_margin = 10.0;
  double max_R = 3162.3;
};

struct PerturbationRow {
  int n = 0;
  int nu = 1;
  double R = 0.0;
  double t = 0.0;
  double distance = 0.0;
  double deficit_h = 0.0;
  double deficit_dual = 0.0;
  double ratio = 0.0;
  double max_interaction_ratio = 0.0;
};

struct PerturbationExperiment {
  std::vector<PerturbationRow> rows;
  double R = 0.0;
  double psi_eigenvalue = 0.0;
  double interaction_deficit = 0.0;  // deficit_h of sigma alone
  bool margin_met = true;
  double spread = 0.0;               // max ratio / min ratio over t
};

PerturbationExperiment perturbation_experiment(int n, int nu, const std::vector<double>& ts,
                                               const PerturbationConfig& cfg = {});

// Energy window check: (nu - 1/2) S^n <= int |grad u|^2 <= (nu + 1/2) S^n.
bool in_energy_window(const Field& u, int nu);
double dirichlet_energy(const Field& u);

}  // namespace critlab

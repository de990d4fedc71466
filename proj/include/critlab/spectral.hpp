#pragma once

#include "critlab/eigensolver.hpp"
#include "critlab/elliptic.hpp"
#include "critlab/grids.hpp"

#include <functional>
#include <string>
#include <vector>

namespace critlab {

enum class WeightKind { SingleBubble, TwoBubble, Custom };

// omega = (sum of bubbles)^{p-1}, or a caller-supplied positive field.
struct WeightDescriptor {
  WeightKind kind = WeightKind::SingleBubble;
  int n = 0;
  std::vector<BubbleParams> bubbles;
  ScalarField custom;

  Vec evaluate(const Grid& grid) const;
};

WeightDescriptor single_bubble_weight(int n, const BubbleParams& b);
// Pair U[-R e1, 1], U[R e1, 1].
WeightDescriptor two_bubble_weight(int n, double R);
WeightDescriptor bubble_sum_weight(int n, std::vector<BubbleParams> bubbles);
WeightDescriptor custom_weight(int n, ScalarField omega);

// Dimension of degree-l spherical harmonics on S^d.
int harmonic_dimension(int l, int d);
// Multiplicity carried by one representative of the given sector.
int sector_multiplicity(const Grid& grid, int sector);

struct EigenPair {
  double lambda = 0.0;
  GridFunction psi;          // int psi^2 omega = 1
  double residual = 0.0;
};

struct SpectralDecomposition {
  WeightDescriptor weight;
  int sector = 0;
  int multiplicity = 1;
  Vec omega;                 // weight at the nodes
  std::vector<EigenPair> pairs;
  int iterations = 0;
};

SpectralDecomposition solve_weighted_eigen(std::shared_ptr<const Grid> grid,
                                           const WeightDescriptor& weight, int sector, int count,
                                           const EigenOptions& opts = {});

struct EpsilonGap {
  int n = 0;
  double Lambda = 0.0;
  double epsilon = 0.0;
  double threshold() const;  // p / (1 - epsilon)
};

EpsilonGap epsilon_gap_from_lambda(int n, double Lambda);
// Lambda from single-bubble solves in sectors 0, 1, 2 on a radial grid.
EpsilonGap epsilon_gap(int n, int radial_cells = 800);

struct Subspace {
  WeightDescriptor weight;
  Vec omega;
  std::vector<GridFunction> basis;  // L^2_omega orthonormal within each sector
  std::string label;

  int dimension() const;            // counts sector multiplicities
  int dimension_in_sector(int sector) const;
};

struct TwoBubbleSpectra {
  double R = 0.0;
  SpectralDecomposition sector0;
  SpectralDecomposition sector1;
};

TwoBubbleSpectra two_bubble_spectra(std::shared_ptr<const AxiGrid> grid, double R,
                                    int count0 = 8, int count1 = 4,
                                    const EigenOptions& opts = {});

struct BuildEReport {
  Subspace E;
  int count_sector0 = 0;
  int count_sector1 = 0;
  int total = 0;             // with multiplicity
  bool threshold_tie = false;
};

class StructuralError : public std::runtime_error {
public:
  StructuralError(const std::string& what, int count) : std::runtime_error(what), count_(count) {}
  int count() const { return count_; }

private:
  int count_;
};

// Eigenfunctions below p/(1-eps); throws StructuralError when the count is not 2n+4.
BuildEReport build_E(const TwoBubbleSpectra& spectra, const EpsilonGap& gap);
// Raw closed-form generators {U, dU/dlambda, dU/dz_1, V, ...} and transverse derivatives.
std::vector<GridFunction> raw_F_generators(std::shared_ptr<const AxiGrid> grid, double R);
Subspace build_F(std::shared_ptr<const AxiGrid> grid, double R);
// Same span built from discrete eigenvectors of each single-bubble weight on this grid
// (sector 0: eigenvalues 1, p, p; sector 1: p), so E and F share one discretization.
Subspace build_F_discrete(std::shared_ptr<const AxiGrid> grid, double R,
                          const EigenOptions& opts = {});

// Gram-Schmidt in L^2_omega, sector by sector.
Subspace orthonormal_subspace(std::vector<GridFunction> functions, const Vec& omega,
                              const WeightDescriptor& weight, const std::string& label);
Eigen::MatrixXd weighted_gram(const std::vector<GridFunction>& fs, const Vec& omega);

double subspace_distance(const Subspace& A, const Subspace& B);
GridFunction project_orthogonal(const GridFunction& g, const Subspace& S);

// ||(-Delta)^{-1}(-Delta psi - lambda omega psi)||^2_{L^2_omega}.
double eigen_defect(const GridFunction& psi, double lambda, const Vec& omega);
// sum_k alpha_k^2 (1 - lambda/lambda_k)^2 with alpha_k = <psi, psi_k>_omega (complete basis).
double eigen_defect_expansion(const GridFunction& psi, double lambda,
                              const SpectralDecomposition& full);

// int_A psi^2 omega / (lambda ||omega||_{L^{n/2}(A)} int psi^2 omega) for the annulus
// a <= |x| < b.
double concentration_ratio(const EigenPair& pair, const Vec& omega, double a, double b);
// Smallest c with omega <= c sum_i (1 + |x - x_i|)^{-4} on the nodes.
double domination_constant(const Grid& grid, const Vec& omega, const std::vector<double>& centers);
// ||psi||_{L^2} / (lambda sqrt(c k) ||psi||_{L^2_omega}).
double l2_bound_ratio(const EigenPair& pair, const Vec& omega, double c, int k);

// int f^2 |x|^{-4} / int |Delta f|^2 for the radial trial f = r^k (1 - r^2)^m on the unit
// ball (k even, m >= 2), by Gauss-Legendre with the given number of points per panel.
double rellich_quotient(int n, int k, int m, int order = 16);
// Sharp constant 16 / (n^2 (n-4)^2), n >= 5.
double rellich_constant(int n);

}  // namespace critlab

#pragma once

#include "critlab/fitting.hpp"
#include "critlab/grids.hpp"

#include <functional>
#include <string>
#include <vector>

namespace critlab {

// min(l1/l2, l2/l1, 1/(l1 l2 |z1 - z2|^2))
double q_parameter(const BubbleParams& a, const BubbleParams& b);

struct InteractionQuery {
  int n = 6;
  BubbleParams first;
  BubbleParams second;
  double alpha = 0.0;
  double beta = 0.0;
};

enum class InteractionRegime { Balanced, Unbalanced, Transition };
std::string to_string(InteractionRegime r);

// |alpha - beta| below this counts as balanced, at or above 0.1 as unbalanced.
inline constexpr double kBalancedTol = 1e-12;
inline constexpr double kUnbalancedGap = 0.1;

InteractionRegime classify_exponents(double alpha, double beta);

struct InteractionResult {
  double value = 0.0;
  double Q = 0.0;
  InteractionRegime regime = InteractionRegime::Unbalanced;
  double predicted_exponent = 0.0;  // on Q: (n-2) min(alpha, beta) / 2
  bool log_correction = false;
  double refinement_error = 0.0;    // relative change against the half-resolution grid
  // Q^e, times log(1/Q) when balanced; not defined in the transition regime.
  double predicted() const;
};

struct QuadratureResolution {
  int ns = 256;
  int nr = 128;
  int radial_cells = 2000;
  double tol = 1e-3;  // relative refinement error accepted
};

// int U1^alpha U2^beta over R^n.  Coaxial reduction to (s, rho) on a two-focus grid, or a
// radial grid when the centers coincide.
InteractionResult interaction_integral(const InteractionQuery& q,
                                       const QuadratureResolution& res = {});

// int phi(U1, U2) for the same geometry; phi takes (U1, U2) node values.
double pair_integral(int n, const BubbleParams& a, const BubbleParams& b,
                     const std::function<double(double, double)>& phi,
                     const QuadratureResolution& res = {}, double* refinement_error = nullptr);

enum class PhiRegime { PurePower, PowerLog, VolumeDominated };
std::string to_string(PhiRegime r);

struct PhiValue {
  double value = 0.0;
  PhiRegime regime = PhiRegime::PurePower;
  double predicted_exponent = 0.0;   // on R
  double predicted_log_power = 0.0;
};

// Three-term closed form with the two t-integrals done by quadrature on [1, R].
PhiValue phi_R(double a, double b, double c, double d, double R, int n);
PhiRegime classify_phi(double a, double d, int n);

struct PhiCheckRow {
  double R = 0.0;
  double integral = 0.0;   // int phi(U, V) with U = U[-R e1, 1], V = U[R e1, 1]
  double phi = 0.0;
  double ratio = 0.0;
};

std::vector<PhiCheckRow> verify_phi_R(const std::function<double(double, double)>& phi, double a,
                                      double b, double c, double d,
                                      const std::vector<double>& Rs, int n,
                                      const QuadratureResolution& res = {});

// int over B(z1, 1/l1) of U1^p U2 divided by the same integral over R^n; needs l1 >= l2.
double localized_fraction(int n, const BubbleParams& first, const BubbleParams& second,
                          const QuadratureResolution& res = {});

struct InteractionSweepRow {
  int n = 0;
  double alpha = 0.0, beta = 0.0;
  double D = 0.0, Q = 0.0;
  double value = 0.0, predicted = 0.0, ratio = 0.0;
};

// Unit-scale pair at separation D for each D.
std::vector<InteractionSweepRow> interaction_sweep(int n, double alpha, double beta,
                                                   const std::vector<double>& Ds,
                                                   const QuadratureResolution& res = {},
                                                   int threads = 1);

struct ExponentModelChoice {
  ScalingModelFit power;      // value ~ A Q^e
  ScalingModelFit power_log;  // value ~ A Q^e log(1/Q)
  bool prefers_log = false;
};

ExponentModelChoice choose_interaction_model(const std::vector<InteractionSweepRow>& rows);

}  // namespace critlab

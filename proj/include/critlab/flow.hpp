#pragma once

#include "critlab/fitting.hpp"
#include "critlab/grids.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace critlab {

// Rescaled fast-diffusion flow d_s(w^p) = Delta w + w^p on a radial grid.

struct VanishingProfile {
  double T = 1.0;
  double z = 0.0;  // radial flows keep the center at the origin
  double lambda = 1.0;

  void validate() const;
};

// ((p-1)/p)^{p/(p-1)}
double vanishing_constant(int n);

// u_{T,0,lambda}(t, .) sampled on the grid; zero for t >= T.
GridFunction vanishing_profile(std::shared_ptr<const Grid> grid, const VanishingProfile& prof,
                               double t);

struct RescaledField {
  double s = 0.0;
  GridFunction w;
};

struct PhysicalField {
  double t = 0.0;
  GridFunction u;
};

RescaledField rescale_to_w(const GridFunction& u, double T, double t);
PhysicalField unrescale(double s, const GridFunction& w, double T);

// 1/2 w'Kw - (1/2*) int w^{2*} with the grid stiffness form.
double energy_J(const GridFunction& w);
// Delta_h w + w^p
GridFunction flow_residual(const GridFunction& w);
double flow_deficit(const GridFunction& w);
// (1/p) int (Delta_h w + w^p)^2 / w^{p-1}, the dissipation rate of J.
double flow_dissipation(const GridFunction& w);

struct FlowState {
  double s = 0.0;
  GridFunction w;
  double J = 0.0;
  double deficit = 0.0;
  double mass_2star = 0.0;
};

FlowState make_state(GridFunction w, double s = 0.0);

class FlowStepError : public std::runtime_error {
public:
  FlowStepError(const std::string& what, double s, double ds, double residual, int halvings)
      : std::runtime_error(what), s_(s), ds_(ds), residual_(residual), halvings_(halvings) {}
  double s() const { return s_; }
  double ds() const { return ds_; }
  double residual() const { return residual_; }
  int halvings() const { return halvings_; }

private:
  double s_, ds_, residual_;
  int halvings_;
};

struct StepOptions {
  double newton_tol = 1e-10;   // max |dv| / max |v|
  int max_newton = 30;
  int max_halvings = 20;
  double positivity_floor = 1e-30;
};

struct StepInfo {
  int newton_iterations = 0;
  int substeps = 0;
  double residual = 0.0;
};

// Advances by exactly ds; rejected substeps are halved and repeated.
FlowState step(const FlowState& state, double ds, const StepOptions& opts = {},
               StepInfo* info = nullptr);

struct TrajectoryPoint {
  double s = 0.0;
  double J = 0.0;
  double deficit = 0.0;
  double mass_2star = 0.0;
  double dissipation = 0.0;     // at the end of the step
  double dJ_ds = 0.0;           // backward difference over the step
  double distance = -1.0;       // ||w - U[0, lambda_fit]||_{L^{2*}}, negative when not sampled
  double lambda_fit = 0.0;
};

enum class FlowOutcome { Converged, Collapse, Blowup, TimeLimit };
std::string to_string(FlowOutcome o);

struct FlowOptions {
  double ds = 0.01;
  double s_max = 40.0;
  double floor = 1e-9;          // converged once the dissipation drops below floor * S^n
  double escape = 0.2;          // relative mass drift that counts as leaving the bubble
  double rise = 100.0;          // dissipation growth over its running minimum that counts as leaving
  int distance_every = 10;      // steps between bubble-distance samples
  bool shoot = true;            // tune the amplitude along w0 so the unstable mode stays put
  int max_shots = 60;
  double shot_tol = 1e-12;
  StepOptions step;
};

struct FlowRun {
  FlowOutcome outcome = FlowOutcome::TimeLimit;
  std::vector<TrajectoryPoint> trajectory;
  double amplitude = 1.0;       // w(0) = amplitude * initial.w
  int shots = 0;
  double J_ref = 0.0;           // limit energy: last J minus the extrapolated dissipation tail
  double J_exact = 0.0;         // S^n / n
  double J_grid_bubble = 0.0;   // J_h of the sampled U[0, lambda_limit]
  double lambda_limit = 0.0;
  bool J_monotone = true;       // strictly decreasing over every accepted step
  double min_excess = 0.0;      // min over the trajectory of J - J_ref
  double energy_identity_error = 0.0;  // max |dJ/ds + D| / D, D averaged over the step
  RateFit dissipation_rate;     // over the last decade of the dissipation
  RateFit J_rate;               // J - J_ref ~ A exp(-C s) over the tail decade
  RateFit distance_rate;
  FlowState final_state;
};

class FlowError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Requires the Dirichlet energy of the initial state in (S^n/2, 3S^n/2).
FlowRun run_to_convergence(const FlowState& initial, const FlowOptions& opts = {});

// The bubble scale minimizing ||w - U[0, lambda]||_{L^{2*}} over [1/64, 64].
double fit_radial_scale(const GridFunction& w, double* distance = nullptr);

struct SteadyCheck {
  double lambda = 1.0;
  double drift = 0.0;  // max |w(1) - w(0)| / max w(0) over one unit of s
};

SteadyCheck steady_drift(std::shared_ptr<const Grid> grid, double lambda, double ds = 0.01);

// Radial eigenfunction of -Delta phi = lambda_k U^{p-1} phi for U = U[0, lambda], k in {0, 1, 2},
// scaled so that int U^{p-1} phi^2 = int U^{2*}.  k = 2 is the slowest decaying mode of the
// linearized flow.
GridFunction radial_mode(std::shared_ptr<const Grid> grid, double lambda, int k);

}  // namespace critlab

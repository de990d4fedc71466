#include "critlab/flow.hpp"
#include "critlab/elliptic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace critlab;
using critlab::test::Gen;
using critlab::test::rel;

namespace {

GridFunction bubble(std::shared_ptr<const Grid> grid, double lambda = 1.0) {
  return sample_bubble(grid, make_params(grid->n(), lambda), BubbleComponent::Value);
}

FlowRun perturbed_run(int n, int cells, double ds, double amplitude = 0.05) {
  auto grid = make_radial_grid({n, cells, 0.5, 4096.0});
  auto w = bubble(grid);
  w.values += amplitude * radial_mode(grid, 1.0, 2).values;
  FlowOptions o;
  o.ds = ds;
  o.s_max = 40;
  return run_to_convergence(make_state(w), o);
}

}  // namespace

TEST_SUITE("flow") {

TEST_CASE("property: rescaling round trip") {
  Gen g(81);
  auto grid = make_radial_grid({5, 200, 0.5, 512.0});
  for (int trial = 0; trial < 10; ++trial) {
    GridFunction u{grid, Vec::NullaryExpr(grid->size(), [&] { return g.log_uniform(1e-6, 10.0); }), 0};
    double T = g.log_uniform(0.1, 10.0), t = T * g.uniform(0.0, 0.99);
    auto w = rescale_to_w(u, T, t);
    auto back = unrescale(w.s, w.w, T);
    CHECK(back.t == doctest::Approx(t).epsilon(1e-12));
    CHECK(((back.u.values - u.values).array() / u.values.array()).abs().maxCoeff() < 1e-12);
  }
  CHECK(rescale_to_w(bubble(grid), 2.0, 0.0).s == 0.0);
  CHECK(unrescale(0.0, bubble(grid), 2.0).t == 0.0);
  CHECK_THROWS_AS(rescale_to_w(bubble(grid), 1.0, 1.0), InvalidParameter);
}

TEST_CASE("vanishing profile") {
  const int n = 6;
  auto grid = make_radial_grid({n, 200, 0.5, 512.0});
  VanishingProfile prof{1.5, 0.0, 1.3};
  const double p = (n + 2.0) / (n - 2.0);
  for (double t : {0.0, 0.4, 1.2}) {
    auto u = vanishing_profile(grid, prof, t);
    auto w = rescale_to_w(u, prof.T, t).w;
    CHECK(((w.values - bubble(grid, 1.3).values).array() / w.values.array()).abs().maxCoeff() < 1e-12);

    // d_t u = Delta(u^{1/p}) = -(u/U^p)^{1/p} U^p with U the closed-form bubble
    const double h = 1e-6;
    auto up = vanishing_profile(grid, prof, t + h), um = vanishing_profile(grid, prof, t - (t > 0 ? h : 0));
    const double span = t > 0 ? 2 * h : h;
    auto U = bubble(grid, 1.3);
    for (Eigen::Index k = 0; k < grid->size(); k += 17) {
      double Up = std::pow(U.values[k], p);
      double dt = (up.values[k] - um.values[k]) / span;
      double rhs = -std::pow(u.values[k] / Up, 1.0 / p) * Up;
      CHECK(rel(dt, rhs) < 1e-4);
    }
  }
  CHECK(vanishing_profile(grid, prof, 2.0).values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(vanishing_constant(6) == doctest::Approx(0.25));
}

TEST_CASE("energy functional at the bubble") {
  for (int n : {4, 6}) {
    auto grid = make_radial_grid({n, 800, 0.5, 4096.0});
    const double S = sobolev_constants(n).S_pow_n;
    auto U = bubble(grid);
    CHECK(rel(energy_J(U), S / n) < 1e-3);
    CHECK(energy_J(zeros(grid)) == 0.0);

    // first variation vanishes up to discretization error
    Gen g(82 + n);
    for (int trial = 0; trial < 5; ++trial) {
      double a = g.log_uniform(0.3, 3.0);
      auto phi = sample(grid, [&](std::span<const double> x) { return std::exp(-a * x[0] * x[0]); });
      const double h = 1e-4;
      GridFunction plus = U, minus = U;
      plus.values += h * phi.values;
      minus.values -= h * phi.values;
      double dJ = (energy_J(plus) - energy_J(minus)) / (2 * h);
      CHECK(std::abs(dJ) < 1e-3 * std::sqrt(inner_H1(phi, phi) * inner_H1(U, U)));
    }
  }
}

TEST_CASE("deficit of a scaled bubble") {
  const int n = 6;
  const double p = (n + 2.0) / (n - 2.0);
  auto grid = make_radial_grid({n, 1600, 0.5, 4096.0});
  auto U = bubble(grid);
  GridFunction w = U;
  w.values *= 1.1;
  GridFunction Up = U;
  Up.values = U.values.array().pow(p);
  CHECK(rel(flow_deficit(w), (std::pow(1.1, p) - 1.1) * lq_dual_norm(Up)) < 1e-3);
  CHECK(flow_deficit(U) < 1e-2 * flow_deficit(w));
}

TEST_CASE("bubbles are discrete steady states up to a drift that shrinks with refinement") {
  const int n = 6;
  for (double lambda : {0.5, 1.0, 2.0}) {
    double coarse = steady_drift(make_radial_grid({n, 400, 0.5, 4096.0}), lambda).drift;
    double fine = steady_drift(make_radial_grid({n, 1600, 0.5, 4096.0}), lambda).drift;
    CHECK(fine < 1e-3);
    CHECK(coarse / fine > 8.0);
  }
}

TEST_CASE("perturbed bubble converges with monotone energy") {
  auto a = perturbed_run(4, 400, 0.02), b = perturbed_run(4, 400, 0.01);
  for (const auto* r : {&a, &b}) {
    CHECK(r->outcome == FlowOutcome::Converged);
    CHECK(r->J_monotone);
    CHECK(r->min_excess >= 0.0);
    CHECK(r->J_rate.rate > 0.0);
    CHECK(rel(r->lambda_limit, 1.0) < 1e-2);
  }
  // the energy identity holds to first order in the step
  CHECK(b.energy_identity_error < a.energy_identity_error);
  CHECK(a.energy_identity_error / b.energy_identity_error > 1.6);
}

TEST_CASE("step rejects bad input") {
  auto grid = make_radial_grid({5, 100, 0.5, 256.0});
  GridFunction w = bubble(grid);
  w.values[3] = -1.0;
  CHECK_THROWS_AS(make_state(w), InvalidParameter);
  auto st = make_state(bubble(grid));
  CHECK_THROWS_AS(step(st, -0.1), InvalidParameter);
  CHECK_THROWS_AS(run_to_convergence(make_state(GridFunction{grid, 3.0 * bubble(grid).values, 0})), FlowError);
}

}  // TEST_SUITE

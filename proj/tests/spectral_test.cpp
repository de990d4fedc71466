#include "critlab/elliptic.hpp"
#include "critlab/spectral.hpp"
#include "support.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <doctest.h>

#include <array>
#include <cmath>

using namespace critlab;
using critlab::test::Gen;
using critlab::test::rel;

namespace {

double closed_form_level(int n, int k) { return 1.0 + 4.0 * k * (k + n - 1) / (n * (n - 2.0)); }

std::shared_ptr<const RadialGrid> radial(int n, int cells = 800) {
  return make_radial_grid({n, cells, 0.5, 4096.0});
}

SpectralDecomposition single(int n, int sector, int count, int cells = 800) {
  return solve_weighted_eigen(radial(n, cells), single_bubble_weight(n, make_params(n, 1.0)), sector, count);
}

// |cos| of the angle between a and b in L^2_omega.
double weighted_cosine(const GridFunction& a, const GridFunction& b, const Vec& omega) {
  return std::abs(inner_weighted(a, b, omega)) /
         std::sqrt(inner_weighted(a, a, omega) * inner_weighted(b, b, omega));
}

// Radial shooting: phi'' + (n-1)/r phi' + lambda U^{p-1} phi = 0 from phi(0) = 1; returns the
// coefficient of the non-decaying harmonic r phi' + (n-2) phi at r = L.
double shooting_defect(int n, double lambda, double L = 400.0) {
  using State = std::array<double, 2>;
  const double p = (n + 2.0) / (n - 2.0);
  auto rhs = [&](const State& y, State& dy, double r) {
    double w = std::pow(bubble_profile(n, 1.0, r * r), p - 1);
    dy[0] = y[1];
    dy[1] = -(n - 1) / r * y[1] - lambda * w * y[0];
  };
  const double r0 = 1e-4, w0 = std::pow(bubble_profile(n, 1.0, 0.0), p - 1);
  State y{1.0 - lambda * w0 * r0 * r0 / (2.0 * n), -lambda * w0 * r0 / n};
  namespace ode = boost::numeric::odeint;
  ode::integrate_adaptive(ode::make_controlled(1e-12, 1e-12, ode::runge_kutta_dopri5<State>()), rhs, y, r0,
                          L, 1e-3);
  return L * y[1] + (n - 2) * y[0];
}

double shooting_eigenvalue(int n, double lo, double hi) {
  boost::math::tools::eps_tolerance<double> tol(40);
  std::uintmax_t it = 100;
  auto [a, b] = boost::math::tools::toms748_solve([&](double l) { return shooting_defect(n, l); }, lo, hi, tol, it);
  return 0.5 * (a + b);
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("single-bubble spectrum in dimension six") {
  auto s0 = single(6, 0, 3);
  CHECK(rel(s0.pairs[0].lambda, 1.0) < 1e-3);
  CHECK(rel(s0.pairs[1].lambda, 2.0) < 1e-3);
  CHECK(rel(s0.pairs[2].lambda, 10.0 / 3.0) < 1e-3);
  auto s1 = single(6, 1, 1);
  CHECK(rel(s1.pairs[0].lambda, 2.0) < 1e-3);
  CHECK(s1.multiplicity == 6);

  auto grid = s0.pairs[0].psi.grid;
  auto U = sample_bubble(grid, make_params(6, 1.0), BubbleComponent::Value);
  CHECK(weighted_cosine(s0.pairs[0].psi, U, s0.omega) > 1 - 1e-4);
  auto dU = sample_bubble(grid, make_params(6, 1.0), BubbleComponent::DLambda);
  CHECK(weighted_cosine(s0.pairs[1].psi, dU, s0.omega) > 1 - 1e-4);
  auto dz = sample_bubble(s1.pairs[0].psi.grid, make_params(6, 1.0), BubbleComponent::DzAxial);
  CHECK(weighted_cosine(s1.pairs[0].psi, dz, s1.omega) > 1 - 1e-4);
}

TEST_CASE("closed-form levels for several dimensions") {
  for (int n : {3, 5, 7}) {
    const double p = (n + 2.0) / (n - 2.0);
    auto s0 = single(n, 0, 3);
    CHECK(rel(s0.pairs[0].lambda, 1.0) < 1e-3);
    CHECK(rel(s0.pairs[1].lambda, p) < 1e-3);
    CHECK(rel(s0.pairs[2].lambda, closed_form_level(n, 2)) < 1e-3);
    auto s2 = single(n, 2, 1);
    CHECK(rel(s2.pairs[0].lambda, closed_form_level(n, 2)) < 1e-3);
  }
}

TEST_CASE("radial shooting confirms the closed-form levels") {
  for (int n : {5, 6}) {
    const double L2 = closed_form_level(n, 2);
    double shot = shooting_eigenvalue(n, 0.5 * ((n + 2.0) / (n - 2.0) + L2), L2 + 1.0);
    CHECK(rel(shot, L2) < 1e-4);
    CHECK(rel(single(n, 0, 3).pairs[2].lambda, shot) < 1e-3);
  }
}

TEST_CASE("spectral gap") {
  auto g6 = epsilon_gap_from_lambda(6, 10.0 / 3.0);
  CHECK(g6.epsilon == doctest::Approx(0.225403).epsilon(1e-6));
  CHECK(g6.threshold() == doctest::Approx(2.0 / std::sqrt(0.6)).epsilon(1e-12));
  auto g7 = epsilon_gap_from_lambda(7, 99.0 / 35.0);
  CHECK(g7.epsilon == doctest::Approx(1 - std::sqrt(63.0 / 99.0)).epsilon(1e-12));
  Gen g(41);
  for (int trial = 0; trial < 20; ++trial) {
    int n = g.integer(3, 12);
    double p = (n + 2.0) / (n - 2.0);
    auto gap = epsilon_gap_from_lambda(n, p * g.uniform(1.01, 3.0));
    CHECK(std::pow(1 - gap.epsilon, 2) * gap.Lambda == doctest::Approx(p).epsilon(1e-14));
  }
  auto computed = epsilon_gap(6);
  CHECK(rel(computed.Lambda, 10.0 / 3.0) < 1e-3);
}

TEST_CASE("two-bubble low spectrum has dimension 2n+4 at R = 10") {
  const int n = 6;
  const double R = 10.0;
  auto grid = make_axi_grid(two_bubble_axi_spec(n, R, 160, 80));
  auto E = build_E(two_bubble_spectra(grid, R), epsilon_gap_from_lambda(n, 10.0 / 3.0));
  CHECK(E.total == 16);
  CHECK(E.count_sector0 == 6);
  CHECK(E.count_sector1 == 2);
  CHECK(E.E.dimension() == 16);

  auto F = build_F(grid, R);
  CHECK(F.dimension() == 16);
  for (int sector : {0, 1}) {
    std::vector<GridFunction> fs;
    for (const auto& b : F.basis)
      if (b.sector == sector) fs.push_back(b);
    auto G = weighted_gram(fs, F.omega);
    CHECK((G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(subspace_distance(E.E, F) < 0.5);
  CHECK(subspace_distance(E.E, build_F_discrete(grid, R)) < 0.5);
}

TEST_CASE("raw generators become orthogonal as the bubbles separate") {
  const int n = 6;
  double prev = INFINITY;
  for (double R : {4.0, 8.0, 16.0}) {
    auto grid = make_axi_grid(two_bubble_axi_spec(n, R, 96, 64));
    auto gens = raw_F_generators(grid, R);
    Vec omega = two_bubble_weight(n, R).evaluate(*grid);
    double worst = 0;
    for (size_t i = 0; i < gens.size(); ++i)
      for (size_t j = i + 1; j < gens.size(); ++j) {
        if (gens[i].sector != gens[j].sector) continue;
        worst = std::max(worst, weighted_cosine(gens[i], gens[j], omega));
      }
    CHECK(worst < prev);
    prev = worst;
  }
}

TEST_CASE("subspace distance and projection") {
  const int n = 5;
  auto grid = make_axi_grid(two_bubble_axi_spec(n, 6.0, 64, 48));
  auto F = build_F(grid, 6.0);
  CHECK(subspace_distance(F, F) < 1e-6);
  Subspace smaller = F;
  smaller.basis.pop_back();
  CHECK(subspace_distance(F, smaller) == 1.0);

  for (const auto& b : F.basis) {
    auto r = project_orthogonal(b, F);
    CHECK(std::sqrt(inner_weighted(r, r, F.omega)) < 1e-8);
  }
  Gen g(42);
  for (int trial = 0; trial < 5; ++trial) {
    GridFunction x{grid, Vec::NullaryExpr(grid->size(), [&] { return g.uniform(-1, 1); }), 0};
    auto px = project_orthogonal(x, F);
    double scale = std::sqrt(inner_weighted(x, x, F.omega));
    for (const auto& b : F.basis)
      if (b.sector == 0) CHECK(std::abs(inner_weighted(px, b, F.omega)) < 1e-10 * scale);
    auto again = project_orthogonal(px, F);
    CHECK((again.values - px.values).norm() < 1e-10 * px.values.norm());
  }
}

TEST_CASE("eigen defect: exact pairs and bubble-sum weights") {
  auto s0 = single(6, 0, 3);
  for (const auto& pr : s0.pairs) CHECK(eigen_defect(pr.psi, pr.lambda, s0.omega) < 1e-16);

  const int n = 6;
  double prev = INFINITY;
  for (double R : {2.0, 4.0, 8.0}) {
    auto grid = make_axi_grid(two_bubble_axi_spec(n, R, 96, 64));
    auto U = sample_bubble(grid, axis_params(n, -R, 1.0), BubbleComponent::Value);
    Vec omega = two_bubble_weight(n, R).evaluate(*grid);
    double d = eigen_defect(U, 1.0, omega) / inner_weighted(U, U, omega);
    CHECK(d < prev);
    prev = d;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("a cut-off two-bubble eigenfunction is almost an eigenfunction of one bubble") {
  const int n = 6;
  const double R = 20.0;
  auto grid = make_axi_grid(two_bubble_axi_spec(n, R, 128, 80));
  auto dec = solve_weighted_eigen(grid, two_bubble_weight(n, R), 0, 1);
  const auto& pr = dec.pairs[0];
  GridFunction cut = pr.psi;
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    double d = std::hypot(grid->axial()[k] - R, grid->transverse()[k]) / (0.5 * R);
    double eta = d <= 1 ? 1.0 : d >= 2 ? 0.0 : 0.5 * (1 + std::cos(M_PI * (d - 1)));
    cut.values[k] *= eta;
  }
  Vec w1 = single_bubble_weight(n, axis_params(n, R, 1.0)).evaluate(*grid);
  double rel_defect = eigen_defect(cut, pr.lambda, w1) / inner_weighted(cut, cut, w1);
  CHECK(rel_defect < 1e-2);
}

TEST_CASE("approximate eigenfunction identity on a complete discrete spectrum") {
  const int n = 5;
  auto grid = radial(n, 240);
  auto w = single_bubble_weight(n, make_params(n, 1.0));
  auto full = solve_weighted_eigen(grid, w, 0, static_cast<int>(grid->size()));
  REQUIRE(full.pairs.size() == static_cast<size_t>(grid->size()));
  // exact eigenfunctions
  for (int k : {0, 1, 2, 10}) {
    const auto& pr = full.pairs[k];
    CHECK(eigen_defect(pr.psi, pr.lambda, full.omega) < 1e-8);
    CHECK(eigen_defect_expansion(pr.psi, pr.lambda, full) < 1e-8);
  }
  Gen g(43);
  for (int trial = 0; trial < 10; ++trial) {
    GridFunction psi = zeros(grid);
    for (int k = 0; k < 12; ++k) psi.values += g.uniform(-1, 1) * full.pairs[k].psi.values;
    double lambda = g.uniform(0.5, 6.0);
    double direct = eigen_defect(psi, lambda, full.omega);
    double expansion = eigen_defect_expansion(psi, lambda, full);
    CHECK(rel(direct, expansion) < 1e-8);
  }
}

TEST_CASE("property: two-sided dual-norm bound on spectrally separated functions") {
  const int n = 6;
  auto grid = radial(n, 400);
  auto dec = solve_weighted_eigen(grid, single_bubble_weight(n, make_params(n, 1.0)), 0, 12);
  const Vec m = grid->weights().cwiseProduct(dec.omega);
  Gen g(44);
  for (int trial = 0; trial < 20; ++trial) {
    double eps = g.uniform(0.05, 0.6);
    double lambda = g.uniform(0.3, 3.0);
    GridFunction u = zeros(grid);
    int used = 0;
    for (const auto& pr : dec.pairs)
      if (pr.lambda >= lambda / (1 - eps)) {
        u.values += g.uniform(-1, 1) * pr.psi.values;
        ++used;
      }
    if (used == 0) continue;
    GridFunction f = u;
    f.values = (grid->stiffness(0) * u.values - lambda * m.cwiseProduct(u.values)).cwiseQuotient(grid->weights());
    double grad = std::sqrt(inner_H1(u, u)), dual = h_minus1_norm(f);
    CHECK(eps * grad <= dual * (1 + 1e-9));
    CHECK(dual <= grad * (1 + 1e-9));
  }
}

TEST_CASE("property: eigenfunctions are orthogonal in the Dirichlet form") {
  const int n = 5;
  auto grid = make_axi_grid(two_bubble_axi_spec(n, 8.0, 96, 64));
  for (int sector : {0, 1}) {
    auto dec = solve_weighted_eigen(grid, two_bubble_weight(n, 8.0), sector, 5);
    for (size_t i = 0; i < dec.pairs.size(); ++i)
      for (size_t j = 0; j < dec.pairs.size(); ++j) {
        double h = inner_H1(dec.pairs[i].psi, dec.pairs[j].psi);
        double expect = i == j ? dec.pairs[i].lambda : 0.0;
        CHECK(std::abs(h - expect) < 1e-6 * dec.pairs[i].lambda);
      }
  }
}

TEST_CASE("property: eigenfunction mass on annuli obeys the Sobolev concentration bound") {
  for (int n : {3, 5, 6}) {
    const double C = std::pow(sobolev_constants(n).S_pow_n, -2.0 / n);
    auto dec = single(n, 0, 6);
    Gen g(45 + n);
    double worst = 0;
    for (const auto& pr : dec.pairs)
      for (int trial = 0; trial < 10; ++trial) {
        double a = g.log_uniform(0.01, 50.0), b = a * g.log_uniform(1.1, 100.0);
        worst = std::max(worst, concentration_ratio(pr, dec.omega, a, b));
      }
    CHECK(worst > 0.0);
    CHECK(worst <= C * (1 + 1e-3));
  }
}

TEST_CASE("Rellich quotients stay below the sharp constant") {
  for (int n : {5, 6, 7}) {
    const double C = rellich_constant(n);
    CHECK(C == doctest::Approx(16.0 / (n * n * (n - 4.0) * (n - 4.0))).epsilon(1e-15));
    for (int k : {0, 2, 4, 6, 8})
      for (int m : {3, 4, 5, 6}) {
        double q = rellich_quotient(n, k, m);
        CHECK(q > 0.0);
        CHECK(q <= C);
        CHECK(rel(rellich_quotient(n, k, m, 32), q) < 1e-10);
      }
  }
  CHECK_THROWS_AS(rellich_constant(4), InvalidParameter);
}

TEST_CASE("L2 integrability bound with the fitted domination constant") {
  for (int n : {5, 6}) {
    const double R = 6.0;
    auto grid = make_axi_grid(two_bubble_axi_spec(n, R, 128, 80));
    auto dec = solve_weighted_eigen(grid, two_bubble_weight(n, R), 0, 6);
    double c = domination_constant(*grid, dec.omega, {-R, R});
    CHECK(c > 0.0);
    for (const auto& pr : dec.pairs) CHECK(l2_bound_ratio(pr, dec.omega, c, 2) <= std::sqrt(rellich_constant(n)));
  }
}

TEST_CASE("weights and multiplicities") {
  CHECK(harmonic_dimension(0, 4) == 1);
  CHECK(harmonic_dimension(1, 4) == 5);
  CHECK(harmonic_dimension(2, 2) == 5);
  auto grid = make_axi_grid(two_bubble_axi_spec(6, 5.0, 32, 24));
  CHECK(sector_multiplicity(*grid, 0) == 1);
  CHECK(sector_multiplicity(*grid, 1) == 5);
  auto r = radial(6, 50);
  CHECK(sector_multiplicity(*r, 1) == 6);
  CHECK(sector_multiplicity(*r, 2) == 20);
}

}  // TEST_SUITE

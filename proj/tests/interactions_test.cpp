#include "critlab/interactions.hpp"
#include "support.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>

using namespace critlab;
using critlab::test::Gen;
using critlab::test::rel;

namespace {

// int_{|x| < b} U^e for U = U[0, 1].
double radial_power_integral(int n, double e, double b = INFINITY) {
  auto f = [&](double r) {
    double v = std::pow(r, n - 1) * std::pow(bubble_profile(n, 1.0, r * r), e);
    return std::isfinite(v) ? v : 0.0;
  };
  double I = std::isinf(b) ? boost::math::quadrature::exp_sinh<double>().integrate(f)
                           : boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, b, 10, 1e-14);
  return unit_sphere_area(n - 1) * I;
}

InteractionQuery pair_query(int n, double D, double alpha, double beta) {
  InteractionQuery q;
  q.n = n;
  q.first = axis_params(n, 0.0, 1.0);
  q.second = axis_params(n, D, 1.0);
  q.alpha = alpha;
  q.beta = beta;
  return q;
}

}  // namespace

TEST_SUITE("interactions") {

TEST_CASE("interaction parameter") {
  const double z20[6] = {20, 0, 0, 0, 0, 0};
  CHECK(q_parameter(make_params(6, 1.0), make_params(6, 1.0, z20)) == doctest::Approx(1.0 / 400));
  CHECK(q_parameter(make_params(6, 1.0), make_params(6, 1.0)) == 1.0);
  CHECK(q_parameter(make_params(6, 1.0), make_params(6, 4.0)) == doctest::Approx(0.25));
  Gen g(51);
  for (int trial = 0; trial < 20; ++trial) {
    int n = g.integer(3, 8);
    auto a = make_params(n, g.log_uniform(0.1, 10.0), g.point(n, 5.0));
    auto b = make_params(n, g.log_uniform(0.1, 10.0), g.point(n, 5.0));
    double q = q_parameter(a, b);
    CHECK(q > 0.0);
    CHECK(q <= 1.0);
    CHECK(q == q_parameter(b, a));
  }
}

TEST_CASE("exponent regimes") {
  CHECK(classify_exponents(1.5, 1.5) == InteractionRegime::Balanced);
  CHECK(classify_exponents(2.0, 1.0) == InteractionRegime::Unbalanced);
  CHECK(classify_exponents(1.5, 1.55) == InteractionRegime::Transition);
}

TEST_CASE("coincident bubbles integrate to the Sobolev mass") {
  for (int n : {3, 5, 6}) {
    const double ts = 2.0 * n / (n - 2.0);
    auto q = pair_query(n, 0.0, 1.3, ts - 1.3);
    auto r = interaction_integral(q);
    CHECK(r.Q == 1.0);
    CHECK(rel(r.value, sobolev_constants(n).S_pow_n) < 1e-8);
  }
}

TEST_CASE("far-field limit of the unbalanced interaction") {
  // int U^p V -> V(0) int U^p with V(0) ~ c_n D^{2-n}
  for (int n : {5, 6}) {
    const double p = (n + 2.0) / (n - 2.0);
    const double mass = radial_power_integral(n, p);
    const double D = 64.0;
    auto r = interaction_integral(pair_query(n, D, p, 1.0));
    double lead = mass * bubble_profile(n, 1.0, D * D);
    CHECK(rel(r.value, lead) < 5e-3);
  }
}

TEST_CASE("unbalanced sweep: fitted exponent within three percent") {
  for (int n : {5, 6}) {
    const double p = (n + 2.0) / (n - 2.0);
    auto rows = interaction_sweep(n, p, 1.0, {8, 16, 32, 64});
    std::vector<double> Q, v;
    for (const auto& r : rows) {
      Q.push_back(r.Q);
      v.push_back(r.value);
    }
    auto fit = fit_power_law(Q, v);
    const double expect = (n - 2.0) / 2.0;
    CHECK(std::abs(fit.exponent - expect) / expect < 0.03);
    CHECK_FALSE(choose_interaction_model(rows).prefers_log);
  }
}

TEST_CASE("balanced sweep prefers the logarithmic model") {
  for (int n : {5, 6}) {
    const double h = n / (n - 2.0);
    auto rows = interaction_sweep(n, h, h, {8, 16, 32, 64, 128});
    CHECK(choose_interaction_model(rows).prefers_log);
  }
}

TEST_CASE("property: exchanging exponents and centers") {
  Gen g(52);
  for (int trial = 0; trial < 6; ++trial) {
    int n = g.integer(3, 7);
    double a = g.uniform(1.0, 2.0 * n / (n - 2.0) - 1.0), b = 2.0 * n / (n - 2.0) - a;
    double D = g.log_uniform(1.0, 40.0);
    auto ab = interaction_integral(pair_query(n, D, a, b));
    auto ba = interaction_integral(pair_query(n, D, b, a));
    CHECK(rel(ab.value, ba.value) < 1e-3);
  }
}

TEST_CASE("H1 pairing of two bubbles converges to the weighted interaction") {
  const int n = 6;
  const double R = 4.0;
  const double exact = interaction_integral(pair_query(n, 2 * R, 2.0, 1.0)).value;
  double err[2];
  int k = 0;
  for (int ns : {96, 192}) {
    auto grid = make_axi_grid(two_bubble_axi_spec(n, R, ns, ns * 2 / 3));
    auto U = sample_bubble(grid, axis_params(n, -R, 1.0), BubbleComponent::Value);
    auto V = sample_bubble(grid, axis_params(n, R, 1.0), BubbleComponent::Value);
    err[k++] = rel(inner_H1(U, V), exact);
  }
  CHECK(err[1] < 5e-3);
  CHECK(err[0] / err[1] > 3.0);
}

TEST_CASE("localized fraction") {
  for (int n : {5, 6}) {
    const double p = (n + 2.0) / (n - 2.0);
    double oracle = radial_power_integral(n, p + 1, 1.0) / sobolev_constants(n).S_pow_n;
    CHECK(rel(localized_fraction(n, make_params(n, 1.0), make_params(n, 1.0)), oracle) < 1e-6);
    Gen g(53 + n);
    for (int trial = 0; trial < 5; ++trial) {
      double D = g.log_uniform(2.0, 100.0);
      double frac = localized_fraction(n, axis_params(n, 0.0, 1.0), axis_params(n, D, 1.0));
      CHECK(frac >= 0.1);
      CHECK(frac <= 1.0);
    }
  }
  CHECK_THROWS_AS(localized_fraction(6, make_params(6, 1.0), make_params(6, 2.0)), InvalidParameter);
}

TEST_CASE("phi_R regimes and scaling") {
  const int n = 6;
  CHECK(phi_R(3, 1, 1, 3, 100, n).regime == PhiRegime::PurePower);
  CHECK(phi_R(1.5, 2.5, 2.5, 1.5, 100, n).regime == PhiRegime::PowerLog);
  CHECK(phi_R(1.2, 2, 2, 1.2, 100, n).regime == PhiRegime::VolumeDominated);
  CHECK_THROWS_AS(phi_R(1, 1, 1, 2, 100, n), InvalidParameter);
  CHECK_THROWS_AS(phi_R(0.5, 0.5, 0.5, 0.5, 100, n), InvalidParameter);

  // local slope at large R matches the predicted exponent and log power
  for (auto e : {std::array<double, 4>{3, 1, 1, 3}, {1.5, 2.5, 2.5, 1.5}, {1.2, 2, 2, 1.2}, {2, 2, 2, 2}}) {
    auto lo = phi_R(e[0], e[1], e[2], e[3], 1e4, n), hi = phi_R(e[0], e[1], e[2], e[3], 1e5, n);
    double slope = std::log(hi.value / lo.value) / std::log(10.0);
    double expect = hi.predicted_exponent + hi.predicted_log_power * std::log(std::log(1e5) / std::log(1e4)) /
                                                std::log(10.0);
    CHECK(std::abs(slope - expect) < 0.02);
  }
}

TEST_CASE("phi_R tracks the pair integral up to bounded constants") {
  const int n = 6;
  auto phi = [](double u, double v) { return u * u * u * v + u * v * v * v; };
  auto rows = verify_phi_R(phi, 3, 1, 1, 3, {8, 16, 32, 64}, n);
  double lo = INFINITY, hi = 0;
  for (const auto& r : rows) {
    CHECK(r.integral > 0.0);
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
  }
  CHECK(hi / lo < 1.1);
}

}  // TEST_SUITE

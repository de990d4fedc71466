#include "critlab/core_math.hpp"

#include "critlab/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace critlab {

Rational Rational::make(long num, long den) {
  if (den == 0) throw InvalidParameter("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long g = std::gcd(num, den);
  if (g == 0) g = 1;
  return Rational{num / g, den / g};
}

Rational operator-(Rational a, Rational b) {
  return Rational::make(a.num * b.den - b.num * a.den, a.den * b.den);
}

Rational operator/(Rational a, Rational b) {
  return Rational::make(a.num * b.den, a.den * b.num);
}

std::string Rational::str() const {
  std::ostringstream os;
  os << num;
  if (den != 1) os << "/" << den;
  return os.str();
}

void check_dimension(int n) {
  if (n < 3) throw InvalidParameter("dimension must be >= 3, got " + std::to_string(n));
}

double unit_sphere_area(int k) {
  double m = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, m) / std::tgamma(m);
}

double bubble_constant(int n) { return std::pow(double(n) * (n - 2), 0.25 * (n - 2)); }

SobolevConstants sobolev_constants(int n) {
  check_dimension(n);
  SobolevConstants c;
  c.n = n;
  c.p = Rational::make(n + 2, n - 2);
  c.two_star = Rational::make(2 * n, n - 2);
  c.two_star_conj = Rational::make(2 * n, n + 2);
  c.p_conj = Rational::make(n + 2, 4);

  // r = tan(theta) turns r^{n-1}(1+r^2)^{-n} dr into (sin cos)^{n-1} dtheta.
  const double half_pi = 0.5 * std::numbers::pi;
  double trig = integrate_gl(
      [n](double th) { return std::pow(std::sin(th) * std::cos(th), n - 1); }, 0.0, half_pi, 8,
      24);
  c.S_pow_n = unit_sphere_area(n - 1) * std::pow(double(n) * (n - 2), 0.5 * n) * trig;
  return c;
}

void BubbleFamily::validate() const {
  check_dimension(n);
  if (members.empty()) throw InvalidParameter("bubble family must have at least one member");
  for (const auto& m : members) {
    if (static_cast<int>(m.params.z.size()) != n)
      throw InvalidParameter("bubble center has wrong dimension");
    if (!(m.params.lambda > 0.0)) throw InvalidParameter("bubble scale must be positive");
  }
}

BubbleParams make_params(int n, double lambda, std::span<const double> z) {
  check_dimension(n);
  if (!(lambda > 0.0)) throw InvalidParameter("lambda must be positive");
  BubbleParams b;
  b.lambda = lambda;
  b.z.assign(n, 0.0);
  if (!z.empty()) {
    if (static_cast<int>(z.size()) != n) throw InvalidParameter("center has wrong dimension");
    std::copy(z.begin(), z.end(), b.z.begin());
  }
  return b;
}

BubbleParams axis_params(int n, double s, double lambda) {
  BubbleParams b = make_params(n, lambda);
  b.z[0] = s;
  return b;
}

double bubble_profile(int n, double lambda, double d2) {
  return bubble_constant(n) * std::pow(lambda, 0.5 * (n - 2)) *
         std::pow(1.0 + lambda * lambda * d2, -0.5 * (n - 2));
}

double dlambda_profile(int n, double lambda, double d2) {
  double q = lambda * lambda * d2;
  return 0.5 * (n - 2) / lambda * bubble_profile(n, lambda, d2) * (1.0 - q) / (1.0 + q);
}

double dz_factor(int n, double lambda, double d2) {
  double q = lambda * lambda * d2;
  return (n - 2) * lambda * lambda * bubble_profile(n, lambda, d2) / (1.0 + q);
}

namespace {

void check_params(int n, const BubbleParams& b, std::span<const double> x) {
  if (!(b.lambda > 0.0)) throw InvalidParameter("lambda must be positive");
  if (static_cast<int>(b.z.size()) != n || static_cast<int>(x.size()) != n)
    throw InvalidParameter("point dimension does not match n");
}

double dist2(std::span<const double> x, const std::vector<double>& z) {
  double d2 = 0.0;
  for (size_t i = 0; i < z.size(); ++i) d2 += (x[i] - z[i]) * (x[i] - z[i]);
  return d2;
}

}  // namespace

double eval_bubble(int n, const BubbleParams& params, std::span<const double> x) {
  check_params(n, params, x);
  return bubble_profile(n, params.lambda, dist2(x, params.z));
}

double eval_dlambda(int n, const BubbleParams& params, std::span<const double> x) {
  check_params(n, params, x);
  return dlambda_profile(n, params.lambda, dist2(x, params.z));
}

double eval_dz(int n, const BubbleParams& params, std::span<const double> x, int axis) {
  check_params(n, params, x);
  if (axis < 0 || axis >= n) throw InvalidParameter("axis index out of range");
  return dz_factor(n, params.lambda, dist2(x, params.z)) * (x[axis] - params.z[axis]);
}

double bubble_laplacian(int n, const BubbleParams& params, std::span<const double> x) {
  check_params(n, params, x);
  const double l2 = params.lambda * params.lambda;
  const double r2 = dist2(x, params.z);
  const double u = bubble_profile(n, params.lambda, r2);
  const double q = 1.0 + l2 * r2;
  // U'/r and U'' from U = A q^{-(n-2)/2}.
  const double du_over_r = -(n - 2) * l2 * u / q;
  const double d2u = du_over_r + (n - 2) * n * l2 * l2 * r2 * u / (q * q);
  return d2u + (n - 1) * du_over_r;
}

ScalarField conformal_map(int n, const BubbleParams& params, ScalarField phi) {
  check_dimension(n);
  if (!(params.lambda > 0.0)) throw InvalidParameter("lambda must be positive");
  return [n, params, phi = std::move(phi)](std::span<const double> x) {
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = params.lambda * (x[i] - params.z[i]);
    return std::pow(params.lambda, 0.5 * (n - 2)) * phi(y);
  };
}

LogCutoff::LogCutoff(int n, std::vector<double> center, double r, double R)
    : n_(n), center_(std::move(center)), r_(r), R_(R) {
  check_dimension(n);
  if (!(r > 0.0) || !(R > r)) throw InvalidParameter("log cutoff needs 0 < r < R");
  if (static_cast<int>(center_.size()) != n) throw InvalidParameter("cutoff center dimension");
}

double LogCutoff::dist(std::span<const double> x) const { return std::sqrt(dist2(x, center_)); }

double LogCutoff::value(std::span<const double> x) const {
  double d = dist(x);
  if (d <= r_) return 1.0;
  if (d >= R_) return 0.0;
  return (std::log(R_) - std::log(d)) / (std::log(R_) - std::log(r_));
}

double LogCutoff::grad_norm(std::span<const double> x) const {
  double d = dist(x);
  if (d <= r_ || d >= R_) return 0.0;
  return 1.0 / (std::log(R_ / r_) * d);
}

double LogCutoff::grad_n_integral() const {
  return unit_sphere_area(n_ - 1) * std::pow(std::log(R_ / r_), 1 - n_);
}

LogCutoff log_cutoff(int n, std::vector<double> center, double r, double R) {
  return LogCutoff(n, std::move(center), r, R);
}

double family_value(const BubbleFamily& fam, std::span<const double> x) {
  double s = 0.0;
  for (const auto& m : fam.members) s += m.alpha * eval_bubble(fam.n, m.params, x);
  return s;
}

double pair_power_excess(double a, double b, double p) {
  if (a < b) std::swap(a, b);
  if (a <= 0.0) return 0.0;
  const double t = b / a;
  return std::pow(a, p) * (std::expm1(p * std::log1p(t)) - std::pow(t, p));
}

double relative_power_increment(double y, double p) {
  if (y > -0.5) return std::expm1(p * std::log1p(y));
  const double v = 1.0 + y;
  return std::copysign(std::pow(std::abs(v), p), v) - 1.0;
}

}  // namespace critlab

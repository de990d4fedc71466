#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace critlab {

class InvalidParameter : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Exact rational used for the critical exponents.
struct Rational {
  long num = 0;
  long den = 1;

  static Rational make(long num, long den);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend Rational operator-(Rational a, Rational b);
  friend Rational operator/(Rational a, Rational b);
  friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
  std::string str() const;
};

struct SobolevConstants {
  int n = 0;
  Rational p;              // (n+2)/(n-2)
  Rational two_star;       // 2n/(n-2)
  Rational two_star_conj;  // 2n/(n+2)
  Rational p_conj;         // (n+2)/4
  double S_pow_n = 0.0;    // int U[0,1]^{2*}, by quadrature

  double pd() const { return p.value(); }
  double two_star_d() const { return two_star.value(); }
  double two_star_conj_d() const { return two_star_conj.value(); }
};

void check_dimension(int n);

// Exponents are exact; S_pow_n comes from Gauss-Legendre quadrature of the radial integral.
SobolevConstants sobolev_constants(int n);

// Area of the unit sphere S^k in R^{k+1}.
double unit_sphere_area(int k);

struct BubbleParams {
  std::vector<double> z;  // center, size n
  double lambda = 1.0;
};

struct WeightedBubble {
  double alpha = 1.0;
  BubbleParams params;
};

struct BubbleFamily {
  int n = 0;
  std::vector<WeightedBubble> members;

  int nu() const { return static_cast<int>(members.size()); }
  void validate() const;
};

BubbleParams make_params(int n, double lambda, std::span<const double> z = {});
// Center on the first axis at s*e_1.
BubbleParams axis_params(int n, double s, double lambda);

using ScalarField = std::function<double(std::span<const double>)>;

// Radial profiles in terms of the squared distance d2 = |x-z|^2.
double bubble_profile(int n, double lambda, double d2);
double dlambda_profile(int n, double lambda, double d2);
// dU/dz_j = dz_factor * (x_j - z_j)
double dz_factor(int n, double lambda, double d2);
// Normalization (n(n-2))^{(n-2)/4}.
double bubble_constant(int n);

double eval_bubble(int n, const BubbleParams& params, std::span<const double> x);
double eval_dlambda(int n, const BubbleParams& params, std::span<const double> x);
// axis is zero-based: 0 <= axis < n.
double eval_dz(int n, const BubbleParams& params, std::span<const double> x, int axis);
// Delta U from the closed-form radial derivatives U'' + (n-1)/r U'.
double bubble_laplacian(int n, const BubbleParams& params, std::span<const double> x);

// T_{z,lambda} phi (x) = lambda^{(n-2)/2} phi(lambda (x - z)).
ScalarField conformal_map(int n, const BubbleParams& params, ScalarField phi);

// Lipschitz cutoff: 1 on B(c,r), 0 outside B(c,R), logarithmic in between.
class LogCutoff {
public:
  LogCutoff(int n, std::vector<double> center, double r, double R);

  double value(std::span<const double> x) const;
  double grad_norm(std::span<const double> x) const;
  // omega_{n-1} log(R/r)^{1-n}
  double grad_n_integral() const;
  double inner_radius() const { return r_; }
  double outer_radius() const { return R_; }

private:
  double dist(std::span<const double> x) const;
  int n_;
  std::vector<double> center_;
  double r_;
  double R_;
};

LogCutoff log_cutoff(int n, std::vector<double> center, double r, double R);

double family_value(const BubbleFamily& fam, std::span<const double> x);

// (a+b)^p - a^p - b^p for a, b >= 0 without cancellation when one term dominates.
double pair_power_excess(double a, double b, double p);
// |1+y|^{p-1}(1+y) - 1, accurate for small y.
double relative_power_increment(double y, double p);

}  // namespace critlab

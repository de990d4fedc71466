#include "critlab/interactions.hpp"

#include "critlab/elliptic.hpp"
#include "critlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

namespace critlab {

namespace {

double dist(const BubbleParams& a, const BubbleParams& b) {
  double d2 = 0.0;
  for (size_t i = 0; i < a.z.size(); ++i) d2 += (a.z[i] - b.z[i]) * (a.z[i] - b.z[i]);
  return std::sqrt(d2);
}

void check_pair(int n, const BubbleParams& a, const BubbleParams& b) {
  check_dimension(n);
  if (static_cast<int>(a.z.size()) != n || static_cast<int>(b.z.size()) != n)
    throw InvalidParameter("bubble center dimension differs from n");
  if (!(a.lambda > 0.0) || !(b.lambda > 0.0)) throw InvalidParameter("scales must be positive");
}

// Node values of both bubbles on a grid adapted to the pair, after moving the centers to
// -D/2 and D/2 on the axis (or both to the origin).
struct PairSamples {
  std::shared_ptr<const Grid> grid;
  Vec U1, U2;
};

PairSamples pair_samples(int n, const BubbleParams& a, const BubbleParams& b, int ns, int nr,
                         int cells) {
  const double D = dist(a, b);
  const double lmin = std::min(a.lambda, b.lambda), lmax = std::max(a.lambda, b.lambda);
  PairSamples ps;
  double s1 = 0.0, s2 = 0.0;
  if (D == 0.0) {
    RadialGridSpec spec;
    spec.n = n;
    spec.cells = cells;
    spec.core = 0.5 / lmax;
    spec.r_max = 4096.0 / lmin;
    ps.grid = make_radial_grid(spec);
  } else {
    AxiGridSpec spec;
    spec.n = n;
    spec.extent = 64.0 * std::max(D, 1.0 / lmin);
    spec.ns = ns;
    spec.nr = nr;
    const double c1 = 0.5 / a.lambda, c2 = 0.5 / b.lambda;
    s1 = -0.5 * D;
    s2 = 0.5 * D;
    if (D > 2.0 * std::max(c1, c2)) {
      spec.foci = {s1, s2};
      spec.cores = {c1, c2};
    } else {
      spec.foci = {0.0};
      spec.cores = {std::min(c1, c2)};
    }
    ps.grid = make_axi_grid(spec);
  }
  const Vec& s = ps.grid->axial();
  const Vec& rho = ps.grid->transverse();
  ps.U1.resize(ps.grid->size());
  ps.U2.resize(ps.grid->size());
  for (Eigen::Index k = 0; k < ps.grid->size(); ++k) {
    double r2 = rho[k] * rho[k];
    ps.U1[k] = bubble_profile(n, a.lambda, (s[k] - s1) * (s[k] - s1) + r2);
    ps.U2[k] = bubble_profile(n, b.lambda, (s[k] - s2) * (s[k] - s2) + r2);
  }
  return ps;
}

double integrate_phi(const PairSamples& ps, const std::function<double(double, double)>& phi) {
  const Vec& w = ps.grid->weights();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) acc += w[k] * phi(ps.U1[k], ps.U2[k]);
  return acc;
}

}  // namespace

double q_parameter(const BubbleParams& a, const BubbleParams& b) {
  if (!(a.lambda > 0.0) || !(b.lambda > 0.0)) throw InvalidParameter("scales must be positive");
  double q = std::min(a.lambda / b.lambda, b.lambda / a.lambda);
  double D = dist(a, b);
  if (D > 0.0) q = std::min(q, 1.0 / (a.lambda * b.lambda * D * D));
  return q;
}

std::string to_string(InteractionRegime r) {
  switch (r) {
    case InteractionRegime::Balanced: return "balanced";
    case InteractionRegime::Unbalanced: return "unbalanced";
    case InteractionRegime::Transition: return "transition";
  }
  return "unknown";
}

InteractionRegime classify_exponents(double alpha, double beta) {
  double gap = std::abs(alpha - beta);
  if (gap <= kBalancedTol) return InteractionRegime::Balanced;
  if (gap >= kUnbalancedGap) return InteractionRegime::Unbalanced;
  return InteractionRegime::Transition;
}

double InteractionResult::predicted() const {
  if (regime == InteractionRegime::Transition) return NAN;
  double v = std::pow(Q, predicted_exponent);
  if (log_correction) v *= std::log(1.0 / Q);
  return v;
}

double pair_integral(int n, const BubbleParams& a, const BubbleParams& b,
                     const std::function<double(double, double)>& phi,
                     const QuadratureResolution& res, double* refinement_error) {
  check_pair(n, a, b);
  PairSamples fine = pair_samples(n, a, b, res.ns, res.nr, res.radial_cells);
  double v = integrate_phi(fine, phi);
  if (refinement_error) {
    PairSamples coarse = pair_samples(n, a, b, res.ns / 2, res.nr / 2, res.radial_cells / 2);
    double vc = integrate_phi(coarse, phi);
    *refinement_error = v != 0.0 ? std::abs(v - vc) / std::abs(v) : std::abs(v - vc);
  }
  return v;
}

InteractionResult interaction_integral(const InteractionQuery& q, const QuadratureResolution& res) {
  check_pair(q.n, q.first, q.second);
  const double two_star = 2.0 * q.n / (q.n - 2.0);
  if (!(q.alpha >= 0.0) || !(q.beta >= 0.0))
    throw InvalidParameter("interaction exponents must be nonnegative");
  if (std::abs(q.alpha + q.beta - two_star) > 1e-12)
    throw InvalidParameter("interaction exponents must sum to 2*");
  InteractionResult r;
  const double al = q.alpha, be = q.beta;
  r.value = pair_integral(
      q.n, q.first, q.second,
      [al, be](double x, double y) { return std::pow(x, al) * std::pow(y, be); }, res,
      &r.refinement_error);
  // Second-order quadrature: the half-resolution change overstates the error by about 3.
  if (r.refinement_error / 3.0 > res.tol)
    throw SolverFailure("interaction quadrature not converged under refinement",
                        r.refinement_error);
  r.Q = q_parameter(q.first, q.second);
  r.regime = classify_exponents(q.alpha, q.beta);
  r.predicted_exponent = (q.n - 2) * std::min(q.alpha, q.beta) / 2.0;
  r.log_correction = r.regime == InteractionRegime::Balanced;
  return r;
}

std::string to_string(PhiRegime r) {
  switch (r) {
    case PhiRegime::PurePower: return "pure power";
    case PhiRegime::PowerLog: return "power*log";
    case PhiRegime::VolumeDominated: return "volume-dominated";
  }
  return "unknown";
}

PhiRegime classify_phi(double a, double d, int n) {
  const double crit = double(n) / (n - 2);
  const double m = std::max(a, d);
  if (std::abs(m - crit) <= 1e-12 * crit) return PhiRegime::PowerLog;
  return m > crit ? PhiRegime::PurePower : PhiRegime::VolumeDominated;
}

PhiValue phi_R(double a, double b, double c, double d, double R, int n) {
  check_dimension(n);
  if (a < 0 || b < 0 || c < 0 || d < 0) throw InvalidParameter("phi_R exponents must be >= 0");
  if (std::abs((a + b) - (c + d)) > 1e-12 * std::max(1.0, a + b))
    throw InvalidParameter("phi_R needs a + b = c + d");
  if (!(a + b > double(n) / (n - 2))) throw InvalidParameter("phi_R needs a + b > n/(n-2)");
  if (!(R > 1.0)) throw InvalidParameter("phi_R needs R > 1");
  auto tint = [&](double e) {
    // int_1^R t^e dt in log-spaced panels (t = exp(u) keeps the integrand smooth).
    return integrate_gl([e](double u) { return std::exp((e + 1.0) * u); }, 0.0, std::log(R),
                        32, 16);
  };
  const double k = n - 2.0;
  PhiValue out;
  out.value = std::pow(R, -b * k) * tint(n - 1 - a * k) + std::pow(R, -c * k) * tint(n - 1 - d * k) +
              std::pow(R, n - (a + b) * k);
  out.regime = classify_phi(a, d, n);
  switch (out.regime) {
    case PhiRegime::PurePower: out.predicted_exponent = -std::min(b, c) * k; break;
    case PhiRegime::PowerLog:
      out.predicted_exponent = -std::min(b, c) * k;
      out.predicted_log_power = 1.0;
      break;
    case PhiRegime::VolumeDominated: out.predicted_exponent = n - (a + b) * k; break;
  }
  return out;
}

std::vector<PhiCheckRow> verify_phi_R(const std::function<double(double, double)>& phi, double a,
                                      double b, double c, double d,
                                      const std::vector<double>& Rs, int n,
                                      const QuadratureResolution& res) {
  std::vector<PhiCheckRow> rows;
  for (double R : Rs) {
    PhiCheckRow row;
    row.R = R;
    row.integral = pair_integral(n, axis_params(n, -R, 1.0), axis_params(n, R, 1.0), phi, res);
    row.phi = phi_R(a, b, c, d, R, n).value;
    row.ratio = row.integral / row.phi;
    rows.push_back(row);
  }
  return rows;
}

double localized_fraction(int n, const BubbleParams& first, const BubbleParams& second,
                          const QuadratureResolution& res) {
  check_pair(n, first, second);
  if (first.lambda < second.lambda)
    throw InvalidParameter("localized_fraction needs lambda1 >= lambda2");
  const double p = (n + 2.0) / (n - 2.0);
  const double D = dist(first, second);
  const double l1 = first.lambda, l2 = second.lambda;
  // Ball part in polar coordinates about z1: r in [0, 1/l1], theta the angle to z2 - z1.
  const double area = unit_sphere_area(n - 2);
  auto inner = [&](double r) {
    const double u1 = std::pow(bubble_profile(n, l1, r * r), p);
    double th = integrate_gl(
        [&](double t) {
          double d2 = r * r + D * D - 2.0 * r * D * std::cos(t);
          return std::pow(std::sin(t), n - 2) * bubble_profile(n, l2, std::max(d2, 0.0));
        },
        0.0, std::numbers::pi, 16, 16);
    return area * std::pow(r, n - 1) * u1 * th;
  };
  const double ball = integrate_gl(inner, 0.0, 1.0 / l1, 16, 16);
  const double total =
      pair_integral(n, first, second, [p](double x, double y) { return std::pow(x, p) * y; }, res);
  return ball / total;
}

std::vector<InteractionSweepRow> interaction_sweep(int n, double alpha, double beta,
                                                   const std::vector<double>& Ds,
                                                   const QuadratureResolution& res, int threads) {
  std::vector<InteractionSweepRow> rows(Ds.size());
  auto work = [&](size_t i) {
    InteractionQuery q;
    q.n = n;
    q.first = axis_params(n, 0.0, 1.0);
    q.second = axis_params(n, Ds[i], 1.0);
    q.alpha = alpha;
    q.beta = beta;
    InteractionResult r = interaction_integral(q, res);
    InteractionSweepRow& row = rows[i];
    row.n = n;
    row.alpha = alpha;
    row.beta = beta;
    row.D = Ds[i];
    row.Q = r.Q;
    row.value = r.value;
    row.predicted = r.predicted();
    row.ratio = row.value / row.predicted;
  };
  threads = std::max(1, std::min<int>(threads, static_cast<int>(Ds.size())));
  if (threads == 1) {
    for (size_t i = 0; i < Ds.size(); ++i) work(i);
    return rows;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (size_t i = t; i < Ds.size(); i += threads) work(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return rows;
}

ExponentModelChoice choose_interaction_model(const std::vector<InteractionSweepRow>& rows) {
  std::vector<double> Q, v, L;
  for (const auto& r : rows) {
    Q.push_back(r.Q);
    v.push_back(r.value);
    L.push_back(std::log(1.0 / r.Q));
  }
  ExponentModelChoice c;
  c.power = fit_power_law(Q, v);
  c.power_log = fit_power_fixed_log(Q, v, L, 1.0);
  c.prefers_log = &select_model(c.power, c.power_log) == &c.power_log;
  return c;
}

}  // namespace critlab

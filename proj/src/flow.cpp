#include "critlab/flow.hpp"

#include "critlab/elliptic.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace critlab {

namespace {

double exponent_p(int n) { return (n + 2.0) / (n - 2.0); }
double exponent_2star(int n) { return 2.0 * n / (n - 2.0); }

void require_radial(const GridFunction& w, const char* who) {
  if (!w.grid || w.grid->kind() != GridKind::Radial || w.sector != 0)
    throw InvalidParameter(std::string(who) + " needs a sector-0 radial grid function");
}

void require_positive(const GridFunction& w, const char* who) {
  if (!(w.values.minCoeff() > 0.0)) throw InvalidParameter(std::string(who) + " needs w > 0");
}

struct Tridiag {
  Vec lower, diag, upper;  // lower[i] = K(i, i-1), upper[i] = K(i, i+1)
};

Tridiag tridiagonal(const SpMat& K) {
  const Eigen::Index N = K.rows();
  Tridiag t{Vec::Zero(N), Vec::Zero(N), Vec::Zero(N)};
  for (Eigen::Index c = 0; c < K.outerSize(); ++c)
    for (SpMat::InnerIterator it(K, c); it; ++it) {
      const Eigen::Index r = it.row();
      if (r == c) t.diag[r] = it.value();
      else if (r == c + 1) t.lower[r] = it.value();
      else if (r + 1 == c) t.upper[r] = it.value();
      else throw InvalidParameter("flow stiffness is not tridiagonal");
    }
  return t;
}

// Thomas algorithm; the Jacobian is column diagonally dominant so no pivoting is needed.
Vec solve_tridiagonal(const Vec& a, Vec b, const Vec& c, Vec d) {
  const Eigen::Index N = b.size();
  for (Eigen::Index i = 1; i < N; ++i) {
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    d[i] -= m * d[i - 1];
  }
  Vec x(N);
  x[N - 1] = d[N - 1] / b[N - 1];
  for (Eigen::Index i = N - 2; i >= 0; --i) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

struct SubstepResult {
  bool ok = false;
  Vec v;
  int iterations = 0;
  double residual = 0.0;
};

SubstepResult implicit_substep(const Tridiag& K, const Vec& W, const Vec& v_old, double ds,
                               double p, const StepOptions& opts) {
  SubstepResult out;
  Vec v = v_old;
  const double inv_p = 1.0 / p;
  const double shift = 1.0 / ds - 1.0;
  for (int it = 1; it <= opts.max_newton; ++it) {
    const Vec w = v.array().pow(inv_p);
    const Vec d = inv_p * w.array() / v.array();
    Vec Kw = K.diag.cwiseProduct(w);
    Kw.tail(Kw.size() - 1) += K.lower.tail(Kw.size() - 1).cwiseProduct(w.head(w.size() - 1));
    Kw.head(Kw.size() - 1) += K.upper.head(Kw.size() - 1).cwiseProduct(w.tail(w.size() - 1));
    const Vec F = W.cwiseProduct(v - v_old) / ds + Kw - W.cwiseProduct(v);

    Vec lo = Vec::Zero(v.size()), up = Vec::Zero(v.size());
    lo.tail(v.size() - 1) = K.lower.tail(v.size() - 1).cwiseProduct(d.head(v.size() - 1));
    up.head(v.size() - 1) = K.upper.head(v.size() - 1).cwiseProduct(d.tail(v.size() - 1));
    const Vec di = W * shift + K.diag.cwiseProduct(d);
    const Vec dv = solve_tridiagonal(lo, di, up, -F);

    v += dv;
    out.iterations = it;
    out.residual = dv.cwiseAbs().maxCoeff() / v.cwiseAbs().maxCoeff();
    if (!(v.minCoeff() > opts.positivity_floor) || !std::isfinite(out.residual)) return out;
    if (out.residual <= opts.newton_tol) {
      out.ok = true;
      out.v = std::move(v);
      return out;
    }
  }
  return out;
}

GridFunction bubble_on(std::shared_ptr<const Grid> grid, double lambda) {
  return sample_bubble(grid, make_params(grid->n(), lambda), BubbleComponent::Value);
}

double log_distance(const GridFunction& w, double log_lambda) {
  const GridFunction U = bubble_on(w.grid, std::exp(log_lambda));
  GridFunction d = w;
  d.values -= U.values;
  return norm_Lq(d, exponent_2star(w.grid->n()));
}

}  // namespace

void VanishingProfile::validate() const {
  if (!(T > 0.0)) throw InvalidParameter("vanishing profile needs T > 0");
  if (!(lambda > 0.0)) throw InvalidParameter("vanishing profile needs lambda > 0");
  if (z != 0.0) throw InvalidParameter("radial flows need the center at the origin");
}

double vanishing_constant(int n) {
  check_dimension(n);
  const double p = exponent_p(n);
  return std::pow((p - 1.0) / p, p / (p - 1.0));
}

GridFunction vanishing_profile(std::shared_ptr<const Grid> grid, const VanishingProfile& prof,
                               double t) {
  prof.validate();
  GridFunction u = bubble_on(grid, prof.lambda);
  if (t >= prof.T) {
    u.values.setZero();
    return u;
  }
  const int n = grid->n();
  const double p = exponent_p(n);
  const double amp = vanishing_constant(n) * std::pow(prof.T - t, p / (p - 1.0));
  u.values = amp * u.values.array().pow(p);
  return u;
}

RescaledField rescale_to_w(const GridFunction& u, double T, double t) {
  if (!(T > 0.0)) throw InvalidParameter("rescale_to_w needs T > 0");
  if (!(t >= 0.0 && t < T)) throw InvalidParameter("rescale_to_w needs 0 <= t < T");
  const int n = u.grid->n();
  const double p = exponent_p(n);
  const double q = p / (p - 1.0);
  const double amp = vanishing_constant(n) * std::pow(T - t, q);
  RescaledField out;
  out.s = q * std::log(T / (T - t));
  out.w = u;
  out.w.values = (u.values.array() / amp).pow(1.0 / p);
  return out;
}

PhysicalField unrescale(double s, const GridFunction& w, double T) {
  if (!(T > 0.0)) throw InvalidParameter("unrescale needs T > 0");
  if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidParameter("unrescale needs s >= 0");
  const int n = w.grid->n();
  const double p = exponent_p(n);
  const double q = p / (p - 1.0);
  PhysicalField out;
  out.t = T * (1.0 - std::exp(-s / q));
  const double amp = vanishing_constant(n) * std::pow(T - out.t, q);
  out.u = w;
  out.u.values = amp * w.values.array().pow(p);
  return out;
}

double energy_J(const GridFunction& w) {
  require_radial(w, "energy_J");
  const int n = w.grid->n();
  const double ts = exponent_2star(n);
  const double dir = w.values.dot(w.grid->stiffness(0) * w.values);
  const double pot = (w.grid->weights().array() * w.values.array().abs().pow(ts)).sum();
  return 0.5 * dir - pot / ts;
}

GridFunction flow_residual(const GridFunction& w) {
  require_radial(w, "flow_residual");
  const double p = exponent_p(w.grid->n());
  GridFunction r = laplacian_apply(w);
  r.values = w.values.array().abs().pow(p) * w.values.array().sign() - r.values.array();
  return r;
}

double flow_deficit(const GridFunction& w) { return lq_dual_norm(flow_residual(w)); }

double flow_dissipation(const GridFunction& w) {
  require_positive(w, "flow_dissipation");
  const double p = exponent_p(w.grid->n());
  const GridFunction r = flow_residual(w);
  return (w.grid->weights().array() * r.values.array().square() /
          w.values.array().pow(p - 1.0))
             .sum() /
         p;
}

FlowState make_state(GridFunction w, double s) {
  require_radial(w, "make_state");
  require_positive(w, "make_state");
  FlowState st;
  st.s = s;
  st.J = energy_J(w);
  st.deficit = flow_deficit(w);
  st.mass_2star = norm_Lq(w, exponent_2star(w.grid->n()));
  st.mass_2star = std::pow(st.mass_2star, exponent_2star(w.grid->n()));
  st.w = std::move(w);
  if (!std::isfinite(st.J)) throw InvalidParameter("flow state has non-finite energy");
  return st;
}

FlowState step(const FlowState& state, double ds, const StepOptions& opts, StepInfo* info) {
  if (!(ds > 0.0 && ds <= 0.5)) throw InvalidParameter("flow step needs 0 < ds <= 0.5");
  require_radial(state.w, "step");
  require_positive(state.w, "step");
  const double p = exponent_p(state.w.grid->n());
  const Tridiag K = tridiagonal(state.w.grid->stiffness(0));
  const Vec& W = state.w.grid->weights();

  Vec v = state.w.values.array().pow(p);
  double done = 0.0, h = ds;
  int halvings = 0;
  StepInfo local;
  while (done < ds) {
    h = std::min(h, ds - done);
    SubstepResult r = implicit_substep(K, W, v, h, p, opts);
    local.newton_iterations += r.iterations;
    local.residual = r.residual;
    if (!r.ok) {
      if (++halvings > opts.max_halvings)
        throw FlowStepError("implicit flow step failed after halvings", state.s + done, h,
                            r.residual, halvings - 1);
      h *= 0.5;
      continue;
    }
    v = std::move(r.v);
    done += h;
    ++local.substeps;
    if (ds - done < 1e-14 * ds) done = ds;
  }
  if (info) *info = local;
  GridFunction w = state.w;
  w.values = v.array().pow(1.0 / p);
  return make_state(std::move(w), state.s + ds);
}

std::string to_string(FlowOutcome o) {
  switch (o) {
    case FlowOutcome::Converged: return "converged";
    case FlowOutcome::Collapse: return "collapse";
    case FlowOutcome::Blowup: return "blowup";
    case FlowOutcome::TimeLimit: return "time_limit";
  }
  return "unknown";
}

double fit_radial_scale(const GridFunction& w, double* distance) {
  require_radial(w, "fit_radial_scale");
  const double lo = std::log(1.0 / 64.0), hi = std::log(64.0);
  const int scan = 25;
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scan; ++i) {
    const double x = lo + (hi - lo) * i / (scan - 1);
    const double d = log_distance(w, x);
    if (d < best_val) best_val = d, best = i;
  }
  const double step = (hi - lo) / (scan - 1);
  const double a = std::max(lo, lo + step * (best - 1));
  const double b = std::min(hi, lo + step * (best + 1));
  const auto res = boost::math::tools::brent_find_minima(
      [&](double x) { return log_distance(w, x); }, a, b, 40);
  if (distance) *distance = res.second;
  return std::exp(res.first);
}

GridFunction radial_mode(std::shared_ptr<const Grid> grid, double lambda, int k) {
  if (grid->kind() != GridKind::Radial) throw InvalidParameter("radial_mode needs a radial grid");
  if (k < 0 || k > 2) throw InvalidParameter("radial_mode supports k = 0, 1, 2");
  if (!(lambda > 0.0)) throw InvalidParameter("radial_mode needs lambda > 0");
  const int n = grid->n();
  const double p = exponent_p(n);
  GridFunction phi = zeros(grid, 0);
  const Vec& r = grid->axial();
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const double x2 = lambda * lambda * r[i] * r[i];
    const double t = (1.0 - x2) / (1.0 + x2);
    const double g = k == 0 ? 1.0 : k == 1 ? t : (n + 1.0) * t * t - 1.0;
    phi.values[i] = std::pow(1.0 + x2, -0.5 * (n - 2)) * g;
  }
  const GridFunction U = bubble_on(grid, lambda);
  const Vec omega = U.values.array().pow(p - 1.0);
  const double target = (grid->weights().array() * U.values.array().pow(p + 1.0)).sum();
  const double cur = inner_weighted(phi, phi, omega);
  phi.values *= std::sqrt(target / cur);
  return phi;
}

namespace {

struct Evolution {
  FlowOutcome outcome = FlowOutcome::TimeLimit;
  bool mass_rising = false;  // direction of the last step, which is the unstable side
  std::vector<TrajectoryPoint> trajectory;
  FlowState final_state;
};

TrajectoryPoint point_of(const FlowState& st) {
  TrajectoryPoint pt;
  pt.s = st.s;
  pt.J = st.J;
  pt.deficit = st.deficit;
  pt.mass_2star = st.mass_2star;
  pt.dissipation = flow_dissipation(st.w);
  return pt;
}

// Near a bubble the dissipation is a sum of decaying stable modes and the growing unstable one,
// so a rise far above its running minimum means the trajectory is leaving; the sign of the mass
// change since that minimum tells which way.
Evolution evolve(FlowState st, const FlowOptions& opts, double S, bool record) {
  Evolution ev;
  TrajectoryPoint cur = point_of(st);
  if (record) {
    cur.distance = 0.0;
    cur.lambda_fit = fit_radial_scale(st.w, &cur.distance);
    ev.trajectory.push_back(cur);
  }
  double D_min = cur.dissipation, mass_at_min = cur.mass_2star;
  const double mass0 = cur.mass_2star;
  const int steps = static_cast<int>(std::ceil(opts.s_max / opts.ds - 1e-9));
  for (int k = 1; k <= steps; ++k) {
    FlowState next = step(st, opts.ds, opts.step);
    TrajectoryPoint pt = point_of(next);
    pt.dJ_ds = (next.J - st.J) / opts.ds;
    if (record) {
      if (k % opts.distance_every == 0) {
        pt.distance = 0.0;
        pt.lambda_fit = fit_radial_scale(next.w, &pt.distance);
      }
      ev.trajectory.push_back(pt);
    }
    ev.mass_rising = next.mass_2star > st.mass_2star;
    st = std::move(next);
    if (pt.dissipation < D_min) D_min = pt.dissipation, mass_at_min = pt.mass_2star;
    if (pt.dissipation < opts.floor * S) {
      ev.outcome = FlowOutcome::Converged;
      break;
    }
    const bool escaped = std::abs(pt.mass_2star / mass0 - 1.0) > opts.escape;
    if (escaped || pt.dissipation > opts.rise * D_min) {
      ev.outcome = pt.mass_2star < mass_at_min ? FlowOutcome::Collapse : FlowOutcome::Blowup;
      break;
    }
  }
  ev.final_state = std::move(st);
  return ev;
}

FlowState scaled(const FlowState& st, double a) {
  GridFunction w = st.w;
  w.values *= a;
  return make_state(std::move(w), st.s);
}

// Points of the last decade of y above `floor`, from the first time y enters it.
void tail_decade(const std::vector<double>& s, const std::vector<double>& y, double floor,
                 std::vector<double>& ts, std::vector<double>& ty) {
  double lo = std::numeric_limits<double>::infinity();
  for (double v : y)
    if (v > floor) lo = std::min(lo, v);
  std::size_t start = y.size();
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] > floor && y[i] <= 10.0 * lo) {
      start = i;
      break;
    }
  for (std::size_t i = start; i < y.size(); ++i)
    if (y[i] > floor) ts.push_back(s[i]), ty.push_back(y[i]);
}

}  // namespace

FlowRun run_to_convergence(const FlowState& initial, const FlowOptions& opts) {
  require_radial(initial.w, "run_to_convergence");
  require_positive(initial.w, "run_to_convergence");
  if (!(opts.ds > 0.0) || !(opts.s_max > opts.ds)) throw InvalidParameter("bad flow time grid");
  const auto grid = initial.w.grid;
  const int n = grid->n();
  const double S = sobolev_constants(n).S_pow_n;

  const double dir = initial.w.values.dot(grid->stiffness(0) * initial.w.values);
  if (!(dir > 0.5 * S && dir < 1.5 * S)) throw FlowError("initial state outside the energy window");

  FlowRun run;
  run.J_exact = S / n;

  // Bisection on the amplitude along w0.  A trajectory sits on the collapsing side when it
  // leaves with falling mass or, if it converged, when its mass was still falling at the end.
  double amp = 1.0;
  if (opts.shoot) {
    auto high_side = [&](double a) {
      const Evolution e = evolve(scaled(initial, a), opts, S, false);
      ++run.shots;
      if (e.outcome == FlowOutcome::Collapse) return false;
      if (e.outcome == FlowOutcome::Blowup) return true;
      return e.mass_rising;
    };
    const bool high0 = high_side(amp);
    const double sign = high0 ? -1.0 : 1.0;
    double prev = amp, width = 1e-4, a_lo = amp, a_hi = amp;
    bool bracketed = false;
    while (run.shots < opts.max_shots && width < 0.5) {
      const double trial = amp + sign * width;
      if (high_side(trial) != high0) {
        a_lo = std::min(prev, trial);
        a_hi = std::max(prev, trial);
        bracketed = true;
        break;
      }
      prev = trial;
      width *= 2.0;
    }
    if (!bracketed) throw FlowError("could not bracket the unstable amplitude");
    while (a_hi - a_lo > opts.shot_tol * a_hi && run.shots < opts.max_shots) {
      const double mid = 0.5 * (a_lo + a_hi);
      (high_side(mid) ? a_hi : a_lo) = mid;
    }
    amp = 0.5 * (a_lo + a_hi);
  }

  Evolution ev = evolve(scaled(initial, amp), opts, S, true);
  run.amplitude = amp;
  run.outcome = ev.outcome;
  run.trajectory = std::move(ev.trajectory);
  run.final_state = std::move(ev.final_state);
  run.lambda_limit = fit_radial_scale(run.final_state.w);
  run.J_grid_bubble = energy_J(bubble_on(grid, run.lambda_limit));

  std::vector<double> s, D, ds_s, dist;
  for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
    const TrajectoryPoint& pt = run.trajectory[i];
    s.push_back(pt.s);
    D.push_back(pt.dissipation);
    if (i > 0) {
      const TrajectoryPoint& prev = run.trajectory[i - 1];
      if (!(pt.J < prev.J)) run.J_monotone = false;
      const double Dm = 0.5 * (pt.dissipation + prev.dissipation);
      if (Dm > 1e3 * opts.floor * S)
        run.energy_identity_error = std::max(run.energy_identity_error, std::abs(pt.dJ_ds + Dm) / Dm);
    }
    if (pt.distance >= 0.0) ds_s.push_back(pt.s), dist.push_back(pt.distance);
  }

  // J(s) - J_inf is the integral of D over (s, inf); past the last sample D ~ exp(-C s).
  std::vector<double> ts, ty;
  tail_decade(s, D, 0.0, ts, ty);
  run.J_ref = run.trajectory.back().J;
  if (ts.size() >= 3) {
    run.dissipation_rate = fit_exponential_rate(ts, ty);
    if (run.dissipation_rate.rate > 0.0)
      run.J_ref -= run.trajectory.back().dissipation / run.dissipation_rate.rate;
  }
  std::vector<double> ex;
  run.min_excess = std::numeric_limits<double>::infinity();
  for (const TrajectoryPoint& pt : run.trajectory) {
    ex.push_back(pt.J - run.J_ref);
    run.min_excess = std::min(run.min_excess, pt.J - run.J_ref);
  }
  ts.clear();
  ty.clear();
  tail_decade(s, ex, 1e-12 * S, ts, ty);
  if (ts.size() >= 3) run.J_rate = fit_exponential_rate(ts, ty);
  if (!ts.empty()) {
    std::vector<double> dts, dty;
    for (std::size_t i = 0; i < ds_s.size(); ++i)
      if (ds_s[i] >= ts.front() && dist[i] > 0.0) dts.push_back(ds_s[i]), dty.push_back(dist[i]);
    if (dts.size() >= 3) run.distance_rate = fit_exponential_rate(dts, dty);
  }
  return run;
}

SteadyCheck steady_drift(std::shared_ptr<const Grid> grid, double lambda, double ds) {
  FlowState st = make_state(bubble_on(grid, lambda));
  const Vec w0 = st.w.values;
  const int steps = static_cast<int>(std::lround(1.0 / ds));
  for (int k = 0; k < steps; ++k) st = step(st, ds);
  SteadyCheck out;
  out.lambda = lambda;
  out.drift = (st.w.values - w0).cwiseAbs().maxCoeff() / w0.maxCoeff();
  return out;
}

}  // namespace critlab

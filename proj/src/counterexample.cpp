#include "critlab/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace critlab {

namespace {

double pexp(int n) { return double(n + 2) / double(n - 2); }

std::vector<const GridFunction*> sector_members(const Subspace& S, int sector) {
  std::vector<const GridFunction*> out;
  for (const auto& b : S.basis)
    if (b.sector == sector) out.push_back(&b);
  return out;
}

}  // namespace

GridFunction build_f(int n, double R, std::shared_ptr<const Grid> grid) {
  if (!(R > 1.0)) throw InvalidParameter("build_f needs R > 1");
  if (grid->n() != n) throw InvalidParameter("grid dimension differs from n");
  const double p = pexp(n);
  GridFunction U = sample_bubble(grid, axis_params(n, -R, 1.0), BubbleComponent::Value);
  GridFunction V = sample_bubble(grid, axis_params(n, R, 1.0), BubbleComponent::Value);
  GridFunction f = zeros(grid, 0);
  for (Eigen::Index k = 0; k < f.size(); ++k)
    f.values[k] = pair_power_excess(U.values[k], V.values[k], p);
  return f;
}

GridFunction build_ftilde(const GridFunction& f, const Subspace& E) {
  GridFunction out = f;
  const Vec& w = f.grid->weights();
  for (const auto* psi : sector_members(E, f.sector)) check_same_grid(f, *psi);
  // Two passes keep the L^2 orthogonality at roundoff level.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto* psi : sector_members(E, f.sector)) {
      double c = (w.array() * out.values.array() * psi->values.array()).sum();
      out.values -= c * E.omega.cwiseProduct(psi->values);
    }
  return out;
}

RhoSolve solve_rho(const GridFunction& ftilde, const Subspace& E,
                   const SpectralDecomposition& sector0, double tol, int max_iterations) {
  auto grid = ftilde.grid;
  const int n = grid->n();
  const double p = pexp(n);
  if (ftilde.sector != 0) throw InvalidParameter("solve_rho works in sector 0");
  auto Q = sector_members(E, 0);

  RhoSolve out;
  out.min_gap = INFINITY;
  for (const auto& pr : sector0.pairs) {
    bool inE = false;
    for (const auto* q : Q)
      if (std::abs(inner_weighted(*q, pr.psi, E.omega)) > 0.5) inE = true;
    if (!inE) out.min_gap = std::min(out.min_gap, pr.lambda - p);
  }
  if (!(out.min_gap > 1e-4))
    throw SpectralGapError("spectral gap violated: lambda_k - p = " + std::to_string(out.min_gap));

  const SpMat& K = grid->stiffness(0);
  const Vec m = grid->weights().cwiseProduct(E.omega);
  auto solver = poisson_solver(grid, 0);
  auto A = [&](const Vec& x) -> Vec { return K * x - p * m.cwiseProduct(x); };
  // M-orthogonal projection off E for primal vectors, and its transpose for residuals.
  auto P = [&](Vec x) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto* q : Q) x -= q->values.dot(m.cwiseProduct(x)) * q->values;
    return x;
  };
  auto Pt = [&](Vec r) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto* q : Q) r -= q->values.dot(r) * m.cwiseProduct(q->values);
    return r;
  };

  const Vec b = Pt(grid->weights().cwiseProduct(ftilde.values));
  const double bnorm = b.norm();
  out.rho = zeros(grid, 0);
  if (bnorm == 0.0) return out;
  Vec x = Vec::Zero(b.size());
  Vec r = b;
  Vec z = P(solver->solve_dual(r));
  Vec d = z;
  double rz = r.dot(z);
  int it = 0;
  for (; it < max_iterations; ++it) {
    if (r.norm() <= tol * bnorm) break;
    Vec Ad = A(d);
    double dAd = d.dot(Ad);
    if (!(dAd > 0.0)) throw SpectralGapError("operator not positive on the complement of E");
    double alpha = rz / dAd;
    x += alpha * d;
    r = Pt(r - alpha * Ad);
    z = P(solver->solve_dual(r));
    double rz_new = r.dot(z);
    d = z + (rz_new / rz) * d;
    rz = rz_new;
  }
  x = P(x);
  out.iterations = it;
  Vec res = grid->weights().cwiseProduct(ftilde.values) - A(x);
  const Vec& w = grid->weights();
  double rl2 = std::sqrt((res.array().square() / w.array()).sum());
  double fl2 = std::sqrt((w.array() * ftilde.values.array().square()).sum());
  out.relative_residual = fl2 > 0.0 ? rl2 / fl2 : 0.0;
  if (r.norm() > tol * bnorm && out.relative_residual > 1e-6)
    throw SolverFailure("projected CG did not converge", out.relative_residual);
  out.rho.values = x;
  return out;
}

GridFunction rho_by_expansion(const GridFunction& ftilde, const SpectralDecomposition& full,
                              double tau) {
  const double p = pexp(ftilde.grid->n());
  GridFunction rho = zeros(ftilde.grid, ftilde.sector);
  const Vec& w = ftilde.grid->weights();
  for (const auto& pr : full.pairs) {
    if (pr.lambda < tau) continue;
    // <ftilde/omega, psi>_omega = <ftilde, psi>_{L^2}
    double c = (w.array() * ftilde.values.array() * pr.psi.values.array()).sum();
    rho.values += c / (pr.lambda - p) * pr.psi.values;
  }
  return rho;
}

double zeta(int n, double t) {
  check_dimension(n);
  if (!(t > 0.0 && t < 1.0)) throw InvalidParameter("zeta needs 0 < t < 1");
  const double L = std::abs(std::log(t));
  if (n == 6) return t / L;
  if (n == 7) return std::pow(t, 10.0 / 9.0);
  if (n == 8) return std::pow(t, 1.2) * L;
  if (n > 8) return std::pow(t, (n + 4.0) / (n + 2.0));
  throw InvalidParameter("zeta is defined for n >= 6");
}

double xi(int n, double t) { return std::sqrt(t * zeta(n, t)); }

GridFunction counterexample_residual(const CounterexampleRun& run) {
  auto grid = run.grid;
  const int n = run.n;
  const double p = pexp(n);
  GridFunction U = sample_bubble(grid, axis_params(n, -run.R, 1.0), BubbleComponent::Value);
  GridFunction V = sample_bubble(grid, axis_params(n, run.R, 1.0), BubbleComponent::Value);
  const Vec S = U.values + V.values;
  const Vec& w = grid->weights();
  const Vec& rho = run.rho.values;
  const Vec m = w.cwiseProduct(run.E.E.omega);
  Vec lin_res = w.cwiseProduct(run.ftilde.values) - (grid->stiffness(0) * rho - p * m.cwiseProduct(rho));
  GridFunction out = zeros(grid, 0);
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    double y = rho[k] / S[k];
    double nl = std::pow(S[k], p) * (relative_power_increment(y, p) - p * y);
    out.values[k] = (run.f.values[k] - run.ftilde.values[k]) + nl + lin_res[k] / w[k];
  }
  return out;
}

namespace {

void fill_u_minus(CounterexampleRun& run, const Vec& u) {
  auto grid = run.grid;
  GridFunction um = zeros(grid, 0);
  for (Eigen::Index k = 0; k < um.size(); ++k) um.values[k] = std::max(-u[k], 0.0);
  run.norms.grad_u_minus = std::sqrt(std::max(inner_H1(um, um), 0.0));
  // Delta_h u = -W^{-1} K u, paired with u^- on {u < 0}.
  Vec lap = -(grid->stiffness(0) * u);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < um.size(); ++k)
    if (u[k] < 0.0) acc += um.values[k] * lap[k];
  run.norms.grad_u_minus_identity = std::sqrt(std::max(acc, 0.0));
}

}  // namespace

CounterexampleRun assemble_run(int n, double R, const CounterexampleConfig& cfg) {
  check_dimension(n);
  if (!(R > 1.0)) throw InvalidParameter("R must exceed 1");
  CounterexampleRun run;
  run.n = n;
  run.R = R;
  run.grid = make_axi_grid(two_bubble_axi_spec(n, R, cfg.ns, cfg.nr, cfg.extent_factor, cfg.core));
  run.gap = epsilon_gap(n, cfg.radial_cells);
  TwoBubbleSpectra spectra = two_bubble_spectra(run.grid, R);
  run.E = build_E(spectra, run.gap);
  Subspace F = build_F(run.grid, R);
  run.dEF = subspace_distance(run.E.E, build_F_discrete(run.grid, R));
  run.dEF_sampled = subspace_distance(run.E.E, F);
  if (cfg.spectra_only) return run;

  run.f = build_f(n, R, run.grid);
  run.ftilde = build_ftilde(run.f, run.E.E);
  RhoSolve rs = solve_rho(run.ftilde, run.E.E, spectra.sector0, cfg.solve_tol);
  run.rho = rs.rho;
  run.pde_residual = rs.relative_residual;
  run.min_gap = rs.min_gap;
  run.solve_iterations = rs.iterations;

  const Vec& omega = run.E.E.omega;
  const double rho_w = std::sqrt(inner_weighted(run.rho, run.rho, omega));
  const double ft_l2 = std::sqrt(inner_L2(run.ftilde, run.ftilde));
  for (const auto* psi : sector_members(run.E.E, 0)) {
    if (rho_w > 0.0)
      run.projection_residual = std::max(run.projection_residual,
                                         std::abs(inner_weighted(run.rho, *psi, omega)) / rho_w);
    double psi_l2 = std::sqrt(inner_L2(*psi, *psi));
    if (ft_l2 > 0.0)
      run.ftilde_orthogonality = std::max(
          run.ftilde_orthogonality, std::abs(inner_L2(run.ftilde, *psi)) / (ft_l2 * psi_l2));
  }

  auto& N = run.norms;
  N.grad_rho = std::sqrt(std::max(inner_H1(run.rho, run.rho), 0.0));
  N.f_L2 = norm_Lq(run.f, 2.0);
  N.f_Hm1 = h_minus1_norm(run.f);
  N.ftilde_Hm1 = h_minus1_norm(run.ftilde);
  GridFunction diff = run.f;
  diff.values -= run.ftilde.values;
  N.f_minus_ftilde_dual = lq_dual_norm(diff);
  GridFunction res = counterexample_residual(run);
  N.deficit_dual = lq_dual_norm(res);
  N.deficit_h = h_minus1_norm(res);

  GridFunction S = sample_family(two_bubble_family(n, R), run.grid);
  fill_u_minus(run, S.values + run.rho.values);

  if (N.grad_rho > 0.0 && N.grad_rho < 1.0) {
    run.zeta_of_rho = n >= 6 ? zeta(n, N.grad_rho) : 0.0;
    run.xi_of_rho = n >= 6 ? xi(n, N.grad_rho) : 0.0;
  }

  for (const auto& q : F.basis) {
    if (q.sector != 0) continue;
    double qn = std::sqrt(inner_H1(q, q));
    run.F_coupling.push_back(N.grad_rho > 0.0
                                 ? std::abs(inner_H1(q, run.rho)) / (qn * N.grad_rho)
                                 : 0.0);
  }

  if (cfg.fit) {
    Field u;
    u.bubbles = two_bubble_family(n, R);
    u.remainder = run.rho;
    FitResult fit = fit_bubbles(u, 2, two_bubble_family(n, R));
    run.fitted_distance = fit.rho_h1;
  }
  return run;
}

CounterexampleRun positive_part_run(const CounterexampleRun& run) {
  CounterexampleRun out = run;
  out.positive_part = true;
  const int n = run.n;
  GridFunction S = sample_family(two_bubble_family(n, run.R), run.grid);
  Vec u = S.values + run.rho.values;
  bool any_negative = (u.array() < 0.0).any();
  if (!any_negative) return out;
  Field up;
  up.bubbles = two_bubble_family(n, run.R);
  up.remainder = run.rho;
  for (Eigen::Index k = 0; k < u.size(); ++k)
    if (u[k] < 0.0) up.remainder.values[k] -= u[k];
  Deficit d = deficit(up);
  out.norms.deficit_h = d.h_minus1;
  out.norms.deficit_dual = d.dual;
  fill_u_minus(out, u);
  FitResult fit = fit_bubbles(up, 2, two_bubble_family(n, run.R));
  out.fitted_distance = fit.rho_h1;
  return out;
}

std::pair<double, double> f_L2_reference(int n) {
  check_dimension(n);
  if (n == 6) return {-4.0, 0.0};
  if (n == 7) return {-5.0, 0.0};
  if (n == 8) return {-6.0, 0.5};
  if (n > 8) return {-(n + 4.0) / 2.0, 0.0};
  throw InvalidParameter("no reference exponent below n = 6");
}

std::pair<double, double> f_Hm1_reference(int n) {
  check_dimension(n);
  if (n == 6) return {-4.0, 0.5};
  if (n >= 7) return {-(n + 2.0) / 2.0, 0.0};
  throw InvalidParameter("no reference exponent below n = 6");
}

std::vector<ScalingFit> sweep_fits(const std::vector<CounterexampleRun>& runs) {
  if (runs.size() < 4) throw InvalidParameter("a scaling fit needs at least 4 sweep points");
  const int n = runs.front().n;
  std::vector<double> R, logR;
  for (const auto& r : runs) {
    R.push_back(r.R);
    logR.push_back(std::log(r.R));
  }
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(get(r));
    return v;
  };
  std::vector<ScalingFit> fits;
  auto add = [&](const std::string& name, std::vector<double> vals, bool ref,
                 std::pair<double, double> refv) {
    ScalingFit s;
    s.quantity = name;
    s.R = R;
    s.values = std::move(vals);
    for (double v : s.values)
      if (!(v > 0.0)) {
        s.fit.model = "undefined";
        fits.push_back(s);
        return;
      }
    if (ref && refv.second != 0.0) s.fit = fit_power_fixed_log(R, s.values, logR, refv.second);
    else s.fit = fit_power_law(R, s.values);
    s.has_reference = ref;
    if (ref) {
      s.reference_exponent = refv.first;
      s.reference_log_power = refv.second;
      s.exponent_error = std::abs(s.fit.exponent - refv.first);
    }
    fits.push_back(std::move(s));
  };
  const bool ref = n >= 6;
  add("f_L2", column([](const auto& r) { return r.norms.f_L2; }), ref,
      ref ? f_L2_reference(n) : std::pair<double, double>{});
  add("f_Hm1", column([](const auto& r) { return r.norms.f_Hm1; }), ref,
      ref ? f_Hm1_reference(n) : std::pair<double, double>{});
  add("grad_rho", column([](const auto& r) { return r.norms.grad_rho; }), false, {});
  add("deficit_dual", column([](const auto& r) { return r.norms.deficit_dual; }), false, {});
  add("deficit_over_zeta", column([](const auto& r) {
        return r.zeta_of_rho > 0.0 ? r.norms.deficit_dual / r.zeta_of_rho : 0.0;
      }), false, {});
  add("distance_over_deficit", column([](const auto& r) {
        return r.norms.deficit_h > 0.0 ? r.fitted_distance / r.norms.deficit_h : 0.0;
      }), false, {});
  add("f_L2_over_f_Hm1", column([](const auto& r) { return r.norms.f_L2 / r.norms.f_Hm1; }),
      false, {});
  return fits;
}

SweepResult sweep(int n, const std::vector<double>& Rs, const CounterexampleConfig& cfg,
                  int threads) {
  if (Rs.size() < 4) throw InvalidParameter("sweep needs at least 4 R values");
  SweepResult out;
  out.runs.resize(Rs.size());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(Rs.size())));
  if (threads == 1) {
    for (size_t i = 0; i < Rs.size(); ++i) out.runs[i] = assemble_run(n, Rs[i], cfg);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (size_t i = t; i < Rs.size(); i += threads) out.runs[i] = assemble_run(n, Rs[i], cfg);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  out.fits = sweep_fits(out.runs);
  return out;
}

}  // namespace critlab

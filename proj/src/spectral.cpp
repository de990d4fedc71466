#include "critlab/spectral.hpp"

#include "critlab/quadrature.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace critlab {

// ---------------------------------------------------------------- weights

Vec WeightDescriptor::evaluate(const Grid& grid) const {
  if (grid.n() != n) throw InvalidParameter("weight dimension does not match grid");
  const Eigen::Index N = grid.size();
  Vec w(N);
  if (kind == WeightKind::Custom) {
    std::vector<double> x(n, 0.0);
    for (Eigen::Index k = 0; k < N; ++k) {
      x[0] = grid.axial()[k];
      x[1] = grid.transverse()[k];
      w[k] = custom(x);
    }
  } else {
    const double pm1 = 4.0 / (n - 2);
    const Vec& s = grid.axial();
    const Vec& rho = grid.transverse();
    for (Eigen::Index k = 0; k < N; ++k) {
      double sum = 0.0;
      for (const auto& b : bubbles) {
        double ds = s[k] - b.z[0];
        sum += bubble_profile(n, b.lambda, ds * ds + rho[k] * rho[k]);
      }
      w[k] = std::pow(sum, pm1);
    }
  }
  for (Eigen::Index k = 0; k < N; ++k)
    if (!(w[k] > 0.0) || !std::isfinite(w[k]))
      throw InvalidParameter("weight must be positive and finite on every node");
  return w;
}

WeightDescriptor single_bubble_weight(int n, const BubbleParams& b) {
  WeightDescriptor d;
  d.kind = WeightKind::SingleBubble;
  d.n = n;
  d.bubbles = {b};
  return d;
}

WeightDescriptor two_bubble_weight(int n, double R) {
  WeightDescriptor d;
  d.kind = WeightKind::TwoBubble;
  d.n = n;
  d.bubbles = {axis_params(n, -R, 1.0), axis_params(n, R, 1.0)};
  return d;
}

WeightDescriptor bubble_sum_weight(int n, std::vector<BubbleParams> bubbles) {
  WeightDescriptor d;
  d.kind = bubbles.size() == 1 ? WeightKind::SingleBubble : WeightKind::TwoBubble;
  d.n = n;
  d.bubbles = std::move(bubbles);
  return d;
}

WeightDescriptor custom_weight(int n, ScalarField omega) {
  WeightDescriptor d;
  d.kind = WeightKind::Custom;
  d.n = n;
  d.custom = std::move(omega);
  return d;
}

namespace {

long binom(long a, long b) {
  if (b < 0 || a < b) return 0;
  long r = 1;
  for (long i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return r;
}

void fix_sign(Vec& v) {
  Eigen::Index k;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0) v = -v;
}

}  // namespace

int harmonic_dimension(int l, int d) {
  if (l < 0 || d < 1) throw InvalidParameter("harmonic dimension needs l >= 0, d >= 1");
  return static_cast<int>(binom(l + d, d) - binom(l + d - 2, d));
}

int sector_multiplicity(const Grid& grid, int sector) {
  int d = grid.kind() == GridKind::Radial ? grid.n() - 1 : grid.n() - 2;
  return harmonic_dimension(sector, d);
}

// ---------------------------------------------------------------- eigenproblems

SpectralDecomposition solve_weighted_eigen(std::shared_ptr<const Grid> grid,
                                           const WeightDescriptor& weight, int sector, int count,
                                           const EigenOptions& opts) {
  SpectralDecomposition dec;
  dec.weight = weight;
  dec.sector = sector;
  dec.multiplicity = sector_multiplicity(*grid, sector);
  dec.omega = weight.evaluate(*grid);
  Vec m = grid->weights().cwiseProduct(dec.omega);
  EigenPairs ep = lowest_eigenpairs(grid->stiffness(sector), m, count, opts);
  dec.iterations = ep.iterations;
  for (Eigen::Index j = 0; j < ep.values.size(); ++j) {
    EigenPair pr;
    pr.lambda = ep.values[j];
    pr.psi = zeros(grid, sector);
    pr.psi.values = ep.vectors.col(j);
    fix_sign(pr.psi.values);
    pr.residual = ep.residuals[j];
    dec.pairs.push_back(std::move(pr));
  }
  return dec;
}

double EpsilonGap::threshold() const {
  return (n + 2.0) / (n - 2.0) / (1.0 - epsilon);
}

EpsilonGap epsilon_gap_from_lambda(int n, double Lambda) {
  const double p = (n + 2.0) / (n - 2.0);
  if (!(Lambda > p)) throw InvalidParameter("Lambda must exceed p");
  EpsilonGap g;
  g.n = n;
  g.Lambda = Lambda;
  g.epsilon = 1.0 - std::sqrt(p / Lambda);
  return g;
}

EpsilonGap epsilon_gap(int n, int radial_cells) {
  check_dimension(n);
  RadialGridSpec spec;
  spec.n = n;
  spec.cells = radial_cells;
  auto grid = make_radial_grid(spec);
  const double p = (n + 2.0) / (n - 2.0);
  const WeightDescriptor w = single_bubble_weight(n, make_params(n, 1.0));
  double Lambda = INFINITY;
  // Eigenvalues within 5% of p are the translation/dilation level, not the next one.
  const int counts[3] = {3, 2, 1};
  for (int sector = 0; sector <= 2; ++sector) {
    auto dec = solve_weighted_eigen(grid, w, sector, counts[sector]);
    for (const auto& pr : dec.pairs)
      if (pr.lambda > 1.05 * p) {
        Lambda = std::min(Lambda, pr.lambda);
        break;
      }
  }
  return epsilon_gap_from_lambda(n, Lambda);
}

// ---------------------------------------------------------------- subspaces

int Subspace::dimension() const {
  int d = 0;
  for (const auto& b : basis) d += sector_multiplicity(*b.grid, b.sector);
  return d;
}

int Subspace::dimension_in_sector(int sector) const {
  int d = 0;
  for (const auto& b : basis)
    if (b.sector == sector) ++d;
  return d;
}

TwoBubbleSpectra two_bubble_spectra(std::shared_ptr<const AxiGrid> grid, double R, int count0,
                                    int count1, const EigenOptions& opts) {
  TwoBubbleSpectra sp;
  sp.R = R;
  const WeightDescriptor w = two_bubble_weight(grid->n(), R);
  sp.sector0 = solve_weighted_eigen(grid, w, 0, count0, opts);
  sp.sector1 = solve_weighted_eigen(grid, w, 1, count1, opts);
  return sp;
}

BuildEReport build_E(const TwoBubbleSpectra& spectra, const EpsilonGap& gap) {
  const double tau = gap.threshold();
  BuildEReport rep;
  rep.E.weight = spectra.sector0.weight;
  rep.E.omega = spectra.sector0.omega;
  rep.E.label = "E";
  auto take = [&](const SpectralDecomposition& dec, int& count) {
    bool all_below = !dec.pairs.empty();
    for (const auto& pr : dec.pairs) {
      if (std::abs(pr.lambda - tau) < 1e-6) rep.threshold_tie = true;
      if (pr.lambda < tau) {
        rep.E.basis.push_back(pr.psi);
        ++count;
      } else {
        all_below = false;
      }
    }
    return all_below;
  };
  bool open0 = take(spectra.sector0, rep.count_sector0);
  bool open1 = take(spectra.sector1, rep.count_sector1);
  rep.total = rep.count_sector0 * spectra.sector0.multiplicity +
              rep.count_sector1 * spectra.sector1.multiplicity;
  const int n = spectra.sector0.weight.n;
  if (open0 || open1)
    throw StructuralError("every computed eigenvalue lies below the threshold; request more",
                          rep.total);
  if (rep.total != 2 * n + 4)
    throw StructuralError("eigenvalue count below p/(1-eps) is " + std::to_string(rep.total) +
                              ", expected " + std::to_string(2 * n + 4),
                          rep.total);
  return rep;
}

std::vector<GridFunction> raw_F_generators(std::shared_ptr<const AxiGrid> grid, double R) {
  const int n = grid->n();
  std::vector<GridFunction> out;
  for (double c : {-R, R}) {
    BubbleParams b = axis_params(n, c, 1.0);
    out.push_back(sample_bubble(grid, b, BubbleComponent::Value));
    out.push_back(sample_bubble(grid, b, BubbleComponent::DLambda));
    out.push_back(sample_bubble(grid, b, BubbleComponent::DzAxial));
  }
  for (double c : {-R, R})
    out.push_back(sample_bubble(grid, axis_params(n, c, 1.0), BubbleComponent::DzPerp));
  return out;
}

Eigen::MatrixXd weighted_gram(const std::vector<GridFunction>& fs, const Vec& omega) {
  const int k = static_cast<int>(fs.size());
  Eigen::MatrixXd G(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) G(i, j) = inner_weighted(fs[i], fs[j], omega);
  return G;
}

Subspace orthonormal_subspace(std::vector<GridFunction> functions, const Vec& omega,
                              const WeightDescriptor& weight, const std::string& label) {
  Subspace S;
  S.weight = weight;
  S.omega = omega;
  S.label = label;
  for (auto& f : functions) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : S.basis) {
        if (q.sector != f.sector) continue;
        f.values -= inner_weighted(f, q, omega) * q.values;
      }
    double nrm = std::sqrt(inner_weighted(f, f, omega));
    if (!(nrm > 1e-12)) throw StructuralError("linearly dependent subspace generators", 0);
    f.values /= nrm;
    S.basis.push_back(std::move(f));
  }
  return S;
}

Subspace build_F(std::shared_ptr<const AxiGrid> grid, double R) {
  WeightDescriptor w = two_bubble_weight(grid->n(), R);
  Vec omega = w.evaluate(*grid);
  return orthonormal_subspace(raw_F_generators(grid, R), omega, w, "F");
}

Subspace build_F_discrete(std::shared_ptr<const AxiGrid> grid, double R,
                          const EigenOptions& opts) {
  const int n = grid->n();
  WeightDescriptor w = two_bubble_weight(n, R);
  Vec omega = w.evaluate(*grid);
  std::vector<GridFunction> gens;
  for (int sector = 0; sector <= 1; ++sector)
    for (double c : {-R, R}) {
      auto dec = solve_weighted_eigen(grid, single_bubble_weight(n, axis_params(n, c, 1.0)),
                                      sector, sector == 0 ? 3 : 1, opts);
      for (auto& pr : dec.pairs) gens.push_back(std::move(pr.psi));
    }
  return orthonormal_subspace(std::move(gens), omega, w, "F_h");
}

double subspace_distance(const Subspace& A, const Subspace& B) {
  if (A.basis.empty() || B.basis.empty()) return A.basis.size() == B.basis.size() ? 0.0 : 1.0;
  if (A.basis.front().grid != B.basis.front().grid)
    throw InvalidParameter("subspace distance: grid mismatch");
  if ((A.omega - B.omega).norm() > 1e-10 * A.omega.norm())
    throw InvalidParameter("subspace distance: weight mismatch");
  if (A.dimension() != B.dimension()) return 1.0;
  double d = 0.0;
  for (int sector = 0; sector <= 4; ++sector) {
    std::vector<const GridFunction*> qa, qb;
    for (const auto& f : A.basis)
      if (f.sector == sector) qa.push_back(&f);
    for (const auto& f : B.basis)
      if (f.sector == sector) qb.push_back(&f);
    if (qa.size() != qb.size()) return 1.0;
    if (qa.empty()) continue;
    Eigen::MatrixXd C(qa.size(), qb.size());
    for (size_t i = 0; i < qa.size(); ++i)
      for (size_t j = 0; j < qb.size(); ++j) C(i, j) = inner_weighted(*qa[i], *qb[j], A.omega);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    double smin = svd.singularValues().minCoeff();
    d = std::max(d, std::sqrt(std::max(0.0, 1.0 - smin * smin)));
  }
  return std::min(d, 1.0);
}

GridFunction project_orthogonal(const GridFunction& g, const Subspace& S) {
  GridFunction out = g;
  for (const auto& q : S.basis) {
    if (q.sector != g.sector) continue;
    out.values -= inner_weighted(g, q, S.omega) * q.values;
  }
  return out;
}

// ---------------------------------------------------------------- defect and bounds

double eigen_defect(const GridFunction& psi, double lambda, const Vec& omega) {
  const Grid& grid = *psi.grid;
  Vec m = grid.weights().cwiseProduct(omega);
  Vec f = grid.stiffness(psi.sector) * psi.values - lambda * m.cwiseProduct(psi.values);
  Vec g = poisson_solver(psi.grid, psi.sector)->solve_dual(f);
  return g.dot(m.cwiseProduct(g));
}

double eigen_defect_expansion(const GridFunction& psi, double lambda,
                              const SpectralDecomposition& full) {
  double acc = 0.0;
  for (const auto& pr : full.pairs) {
    double a = inner_weighted(psi, pr.psi, full.omega);
    double t = 1.0 - lambda / pr.lambda;
    acc += a * a * t * t;
  }
  return acc;
}

double concentration_ratio(const EigenPair& pair, const Vec& omega, double a, double b) {
  const Grid& grid = *pair.psi.grid;
  const int n = grid.n();
  const Vec& w = grid.weights();
  double local = 0.0, total = 0.0, wn = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    double v = w[k] * omega[k] * pair.psi.values[k] * pair.psi.values[k];
    total += v;
    double r = grid.radius(k);
    if (r >= a && r < b) {
      local += v;
      wn += w[k] * std::pow(omega[k], 0.5 * n);
    }
  }
  if (wn == 0.0 || total == 0.0) return 0.0;
  return local / (pair.lambda * std::pow(wn, 2.0 / n) * total);
}

double domination_constant(const Grid& grid, const Vec& omega,
                           const std::vector<double>& centers) {
  double c = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    double sum = 0.0;
    for (double z : centers) {
      double d = std::hypot(grid.axial()[k] - z, grid.transverse()[k]);
      sum += std::pow(1.0 + d, -4.0);
    }
    c = std::max(c, omega[k] / sum);
  }
  return c;
}

double l2_bound_ratio(const EigenPair& pair, const Vec& omega, double c, int k) {
  const Vec& w = pair.psi.grid->weights();
  const Vec& v = pair.psi.values;
  double l2 = std::sqrt((w.array() * v.array().square()).sum());
  double lw = std::sqrt((w.array() * omega.array() * v.array().square()).sum());
  return l2 / (pair.lambda * std::sqrt(c * k) * lw);
}

double rellich_constant(int n) {
  if (n < 5) throw InvalidParameter("Rellich constant needs n >= 5");
  return 16.0 / (double(n) * n * (n - 4.0) * (n - 4.0));
}

double rellich_quotient(int n, int k, int m, int order) {
  if (n < 5) throw InvalidParameter("Rellich quotient needs n >= 5");
  if (k < 0 || k % 2 != 0 || m < 2) throw InvalidParameter("trial needs even k >= 0, m >= 2");
  // f = sum_j c_j r^{k+2j}; Delta r^q = q(q+n-2) r^{q-2}.
  std::vector<double> c(m + 1);
  for (int j = 0; j <= m; ++j) c[j] = (j % 2 ? -1.0 : 1.0) * double(binom(m, j));
  auto f = [&](double r) {
    double v = 0.0;
    for (int j = 0; j <= m; ++j) v += c[j] * std::pow(r, k + 2 * j);
    return v;
  };
  auto lap = [&](double r) {
    double v = 0.0;
    for (int j = 0; j <= m; ++j) {
      const int q = k + 2 * j;
      if (q == 0) continue;
      v += c[j] * q * (q + n - 2.0) * std::pow(r, q - 2);
    }
    return v;
  };
  double num = integrate_gl([&](double r) { return std::pow(r, n - 5) * f(r) * f(r); }, 0.0, 1.0,
                            4, order);
  double den = integrate_gl([&](double r) { return std::pow(r, n - 1) * lap(r) * lap(r); }, 0.0,
                            1.0, 4, order);
  return num / den;
}

}  // namespace critlab

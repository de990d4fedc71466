#include "critlab/grids.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>

namespace critlab {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Robin coefficient folded into the last cell: the boundary value b is eliminated from
// A (b - u)/delta = -A kappa b.
double robin_term(double area, double kappa, double delta) {
  return area * kappa / (1.0 + kappa * delta);
}

}  // namespace

double Grid::radius(Eigen::Index k) const { return std::hypot(s_[k], rho_[k]); }

std::vector<double> Grid::point(Eigen::Index k) const {
  std::vector<double> x(n_, 0.0);
  x[0] = s_[k];
  x[1] = rho_[k];
  return x;
}

int Grid::centrifugal_factor(int sector) const {
  if (sector < 0) throw InvalidParameter("sector must be nonnegative");
  return kind() == GridKind::Radial ? sector * (sector + n_ - 2) : sector * (sector + n_ - 3);
}

const SpMat& Grid::stiffness(int sector) const {
  std::lock_guard<std::mutex> lock(cache_mu_);
  auto it = cache_.find(sector);
  if (it != cache_.end()) return *it->second;
  auto mat = std::make_shared<SpMat>(assemble(sector));
  return *cache_.emplace(sector, mat).first->second;
}

// ---------------------------------------------------------------- radial

RadialGrid::RadialGrid(const RadialGridSpec& spec) : Grid(spec.n), spec_(spec) {
  check_dimension(spec.n);
  if (spec.cells < 4) throw InvalidParameter("radial grid needs at least 4 cells");
  if (!(spec.core > 0.0) || !(spec.r_max > spec.core))
    throw InvalidParameter("radial grid needs 0 < core < r_max");
  const int N = spec.cells;
  const double T = std::asinh(spec.r_max / spec.core);
  const double h = T / N;
  const double area = unit_sphere_area(n_ - 1);
  weights_.resize(N);
  s_.resize(N);
  rho_ = Vec::Zero(N);
  face_r_.resize(N + 1);
  for (int i = 0; i <= N; ++i) face_r_[i] = spec.core * std::sinh(i * h);
  for (int i = 0; i < N; ++i) {
    double t = (i + 0.5) * h;
    double r = spec.core * std::sinh(t);
    s_[i] = r;
    weights_[i] = area * std::pow(r, n_ - 1) * spec.core * std::cosh(t) * h;
  }
  harm_ = s_;
}

SpMat RadialGrid::assemble(int sector) const {
  const int N = spec_.cells;
  const double area = unit_sphere_area(n_ - 1);
  const int cf = centrifugal_factor(sector);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * N);
  Vec diag = Vec::Zero(N);
  for (int i = 0; i + 1 < N; ++i) {
    double rf = face_r_[i + 1];
    double c = area * std::pow(rf, n_ - 1) / (s_[i + 1] - s_[i]);
    diag[i] += c;
    diag[i + 1] += c;
    trip.emplace_back(i, i + 1, -c);
    trip.emplace_back(i + 1, i, -c);
  }
  // Centrifugal term chosen so the row annihilates r^sector exactly; the lumped cf*w/r^2 is
  // only O(1) accurate within a few cells of the origin.
  auto flux = [&](int i) { return area * std::pow(face_r_[i + 1], n_ - 1) / (s_[i + 1] - s_[i]); };
  for (int i = 0; i + 1 < N; ++i) {
    if (sector == 0) break;
    double bal = flux(i) * (std::pow(s_[i + 1] / s_[i], sector) - 1.0);
    if (i > 0) bal -= flux(i - 1) * (1.0 - std::pow(s_[i - 1] / s_[i], sector));
    diag[i] += bal;
  }
  diag[N - 1] += cf * weights_[N - 1] / (s_[N - 1] * s_[N - 1]);
  {
    double rf = face_r_[N];
    double kappa = (n_ - 2 + sector) / rf;
    diag[N - 1] += robin_term(area * std::pow(rf, n_ - 1), kappa, rf - s_[N - 1]);
  }
  for (int i = 0; i < N; ++i) trip.emplace_back(i, i, diag[i]);
  SpMat K(N, N);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

std::vector<std::pair<std::string, std::string>> RadialGrid::metadata() const {
  return {{"kind", "radial"},
          {"n", std::to_string(spec_.n)},
          {"cells", std::to_string(spec_.cells)},
          {"core", fmt(spec_.core)},
          {"r_max", fmt(spec_.r_max)}};
}

// ---------------------------------------------------------------- axisymmetric

AxiGrid::AxiGrid(const AxiGridSpec& spec) : Grid(spec.n), spec_(spec) {
  check_dimension(spec.n);
  if (spec.foci.empty() || spec.foci.size() > 2 || spec.cores.size() != spec.foci.size())
    throw InvalidParameter("axisymmetric grid needs one or two foci with matching cores");
  for (double c : spec.cores)
    if (!(c > 0.0)) throw InvalidParameter("axisymmetric grid cores must be positive");
  if (spec.ns < 4 || spec.nr < 4) throw InvalidParameter("axisymmetric grid too small");
  const double L = spec.extent;
  for (double a : spec.foci)
    if (!(std::abs(a) < L)) throw InvalidParameter("focus outside grid extent");

  // Axial map: one sinh branch per focus, glued with matching slope.
  s_nodes_.resize(spec.ns);
  s_jac_.resize(spec.ns);
  if (spec.foci.size() == 1) {
    const double a = spec.foci[0], c = spec.cores[0];
    const double lo = std::asinh((-L - a) / c), hi = std::asinh((L - a) / c);
    const double h = (hi - lo) / spec.ns;
    for (int i = 0; i < spec.ns; ++i) {
      double t = lo + (i + 0.5) * h;
      s_nodes_[i] = a + c * std::sinh(t);
      s_jac_[i] = c * std::cosh(t) * h;
    }
  } else {
    const double a1 = spec.foci[0], a2 = spec.foci[1];
    const double c1 = spec.cores[0], c2 = spec.cores[1];
    if (!(a2 > a1)) throw InvalidParameter("foci must be increasing");
    const double m = 0.5 * (a1 + a2) + (c2 * c2 - c1 * c1) / (2.0 * (a2 - a1));
    if (!(m > a1 && m < a2)) throw InvalidParameter("foci too close for their cores");
    const double lo1 = std::asinh((-L - a1) / c1), hi1 = std::asinh((m - a1) / c1);
    const double lo2 = std::asinh((m - a2) / c2), hi2 = std::asinh((L - a2) / c2);
    const double T1 = hi1 - lo1, T2 = hi2 - lo2;
    int n1 = static_cast<int>(std::lround(spec.ns * T1 / (T1 + T2)));
    n1 = std::clamp(n1, 2, spec.ns - 2);
    const int n2 = spec.ns - n1;
    const double h1 = T1 / n1, h2 = T2 / n2;
    for (int i = 0; i < n1; ++i) {
      double t = lo1 + (i + 0.5) * h1;
      s_nodes_[i] = a1 + c1 * std::sinh(t);
      s_jac_[i] = c1 * std::cosh(t) * h1;
    }
    for (int i = 0; i < n2; ++i) {
      double t = lo2 + (i + 0.5) * h2;
      s_nodes_[n1 + i] = a2 + c2 * std::sinh(t);
      s_jac_[n1 + i] = c2 * std::cosh(t) * h2;
    }
  }
  s_lo_face_ = -L;
  s_hi_face_ = L;

  // Transverse map rho = c sinh(eta), finest core.
  const double cr = *std::min_element(spec.cores.begin(), spec.cores.end());
  const double T = std::asinh(L / cr);
  const double h = T / spec.nr;
  r_nodes_.resize(spec.nr);
  r_jac_.resize(spec.nr);
  r_faces_.resize(spec.nr + 1);
  for (int j = 0; j <= spec.nr; ++j) r_faces_[j] = cr * std::sinh(j * h);
  for (int j = 0; j < spec.nr; ++j) {
    double e = (j + 0.5) * h;
    r_nodes_[j] = cr * std::sinh(e);
    r_jac_[j] = cr * std::cosh(e) * h;
  }

  const double area = unit_sphere_area(n_ - 2);
  const Eigen::Index N = Eigen::Index(spec.ns) * spec.nr;
  weights_.resize(N);
  s_.resize(N);
  rho_.resize(N);
  for (int i = 0; i < spec.ns; ++i)
    for (int j = 0; j < spec.nr; ++j) {
      Eigen::Index k = index(i, j);
      s_[k] = s_nodes_[i];
      rho_[k] = r_nodes_[j];
      weights_[k] = area * std::pow(r_nodes_[j], n_ - 2) * r_jac_[j] * s_jac_[i];
    }
  harm_ = rho_;
}

SpMat AxiGrid::assemble(int sector) const {
  const int ns = spec_.ns, nr = spec_.nr;
  const double area = unit_sphere_area(n_ - 2);
  const int cf = centrifugal_factor(sector);
  const double decay = n_ - 2 + 2 * sector;
  const Eigen::Index N = size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * N);
  Vec diag = Vec::Zero(N);
  auto couple = [&](Eigen::Index a, Eigen::Index b, double c) {
    diag[a] += c;
    diag[b] += c;
    trip.emplace_back(a, b, -c);
    trip.emplace_back(b, a, -c);
  };
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nr; ++j) {
      const Eigen::Index k = index(i, j);
      const double rj = r_nodes_[j];
      if (i + 1 < ns) {
        double c = area * std::pow(rj, n_ - 2) * r_jac_[j] / (s_nodes_[i + 1] - s_nodes_[i]);
        couple(k, index(i + 1, j), c);
      }
      if (j + 1 < nr) {
        double rf = r_faces_[j + 1];
        double c = area * std::pow(rf, n_ - 2) * s_jac_[i] / (r_nodes_[j + 1] - rj);
        couple(k, index(i, j + 1), c);
      }
      if (j + 1 == nr) {
        diag[k] += cf * weights_[k] / (rj * rj);
      } else if (sector > 0) {
        // balanced so the row annihilates rho^sector, as on the radial grid
        auto flux = [&](int jj) {
          return area * std::pow(r_faces_[jj + 1], n_ - 2) * s_jac_[i] / (r_nodes_[jj + 1] - r_nodes_[jj]);
        };
        double bal = flux(j) * (std::pow(r_nodes_[j + 1] / rj, sector) - 1.0);
        if (j > 0) bal -= flux(j - 1) * (1.0 - std::pow(r_nodes_[j - 1] / rj, sector));
        diag[k] += bal;
      }
      // Outer faces.
      if (i == 0 || i == ns - 1) {
        double sf = (i == 0) ? s_lo_face_ : s_hi_face_;
        double a = area * std::pow(rj, n_ - 2) * r_jac_[j];
        double kappa = decay * std::abs(sf) / (sf * sf + rj * rj);
        diag[k] += robin_term(a, kappa, std::abs(sf - s_nodes_[i]));
      }
      if (j == nr - 1) {
        double rf = r_faces_[nr];
        double si = s_nodes_[i];
        double a = area * std::pow(rf, n_ - 2) * s_jac_[i];
        double kappa = decay * rf / (si * si + rf * rf) - sector / rf;
        diag[k] += robin_term(a, std::max(kappa, 0.0), rf - rj);
      }
    }
  for (Eigen::Index k = 0; k < N; ++k) trip.emplace_back(k, k, diag[k]);
  SpMat K(N, N);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

std::vector<std::pair<std::string, std::string>> AxiGrid::metadata() const {
  std::string foci, cores;
  for (size_t i = 0; i < spec_.foci.size(); ++i) {
    if (i) {
      foci += ";";
      cores += ";";
    }
    foci += fmt(spec_.foci[i]);
    cores += fmt(spec_.cores[i]);
  }
  return {{"kind", "axisymmetric"}, {"n", std::to_string(spec_.n)}, {"ns", std::to_string(spec_.ns)},
          {"nr", std::to_string(spec_.nr)}, {"extent", fmt(spec_.extent)}, {"foci", foci},
          {"cores", cores}};
}

std::shared_ptr<const RadialGrid> make_radial_grid(const RadialGridSpec& spec) {
  return std::make_shared<const RadialGrid>(spec);
}

std::shared_ptr<const AxiGrid> make_axi_grid(const AxiGridSpec& spec) {
  return std::make_shared<const AxiGrid>(spec);
}

AxiGridSpec two_bubble_axi_spec(int n, double a, int ns, int nr, double extent_factor,
                                double core) {
  AxiGridSpec spec;
  spec.n = n;
  spec.foci = {-a, a};
  spec.cores = {core, core};
  spec.extent = std::max(extent_factor * a, 64.0);
  spec.ns = ns;
  spec.nr = nr;
  return spec;
}

// ---------------------------------------------------------------- grid functions

GridFunction zeros(std::shared_ptr<const Grid> grid, int sector) {
  GridFunction gf;
  gf.values = Vec::Zero(grid->size());
  gf.grid = std::move(grid);
  gf.sector = sector;
  return gf;
}

GridFunction sample(std::shared_ptr<const Grid> grid, const ScalarField& field, int sector) {
  GridFunction gf = zeros(grid, sector);
  std::vector<double> x(grid->n(), 0.0);
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    x[0] = grid->axial()[k];
    x[1] = grid->transverse()[k];
    double v = field(x);
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite sample at node " + std::to_string(k) + " (s=" +
                               fmt(x[0]) + ", rho=" + fmt(x[1]) + ")");
    gf.values[k] = v;
  }
  return gf;
}

int component_sector(GridKind kind, BubbleComponent comp) {
  switch (comp) {
    case BubbleComponent::Value:
    case BubbleComponent::DLambda:
      return 0;
    case BubbleComponent::DzAxial:
      return kind == GridKind::Radial ? 1 : 0;
    case BubbleComponent::DzPerp:
      return 1;
  }
  return 0;
}

GridFunction sample_bubble(std::shared_ptr<const Grid> grid, const BubbleParams& b,
                           BubbleComponent comp) {
  const int n = grid->n();
  if (static_cast<int>(b.z.size()) != n) throw InvalidParameter("bubble center dimension");
  for (int i = 1; i < n; ++i)
    if (b.z[i] != 0.0) throw InvalidParameter("bubble center must lie on the symmetry axis");
  const bool radial = grid->kind() == GridKind::Radial;
  if (radial && b.z[0] != 0.0) throw InvalidParameter("radial grid needs a centered bubble");
  if (radial && comp == BubbleComponent::DzPerp)
    throw InvalidParameter("radial grid has no transverse derivative channel");
  GridFunction gf = zeros(grid, component_sector(grid->kind(), comp));
  const Vec& s = grid->axial();
  const Vec& rho = grid->transverse();
  const double a = b.z[0], lam = b.lambda;
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    double ds = s[k] - a;
    double d2 = ds * ds + rho[k] * rho[k];
    double v = 0.0;
    switch (comp) {
      case BubbleComponent::Value: v = bubble_profile(n, lam, d2); break;
      case BubbleComponent::DLambda: v = dlambda_profile(n, lam, d2); break;
      case BubbleComponent::DzAxial: v = dz_factor(n, lam, d2) * ds; break;
      case BubbleComponent::DzPerp: v = dz_factor(n, lam, d2) * rho[k]; break;
    }
    gf.values[k] = v;
  }
  return gf;
}

void check_same_grid(const GridFunction& a, const GridFunction& b) {
  if (a.grid != b.grid) throw InvalidParameter("grid mismatch between grid functions");
}

double integrate(const GridFunction& gf) { return gf.grid->weights().dot(gf.values); }

double norm_Lq(const GridFunction& gf, double q) {
  if (!(q >= 1.0)) throw InvalidParameter("norm_Lq needs q >= 1");
  const Vec& w = gf.grid->weights();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < gf.size(); ++k) acc += w[k] * std::pow(std::abs(gf.values[k]), q);
  return std::pow(acc, 1.0 / q);
}

double inner_L2(const GridFunction& a, const GridFunction& b) {
  check_same_grid(a, b);
  if (a.sector != b.sector) return 0.0;
  return (a.grid->weights().array() * a.values.array() * b.values.array()).sum();
}

double inner_weighted(const GridFunction& a, const GridFunction& b, const Vec& weight) {
  check_same_grid(a, b);
  if (a.sector != b.sector) return 0.0;
  return (a.grid->weights().array() * weight.array() * a.values.array() * b.values.array()).sum();
}

double inner_H1(const GridFunction& a, const GridFunction& b) {
  check_same_grid(a, b);
  if (a.sector != b.sector) return 0.0;
  return a.values.dot(a.grid->stiffness(a.sector) * b.values);
}

GridFunction laplacian_apply(const GridFunction& gf) {
  GridFunction out = gf;
  out.values = (gf.grid->stiffness(gf.sector) * gf.values).cwiseQuotient(gf.grid->weights());
  return out;
}

void dump_csv(const GridFunction& gf, std::ostream& os) {
  os << "s,rho,weight,value\n";
  os.precision(17);
  const Grid& g = *gf.grid;
  for (Eigen::Index k = 0; k < gf.size(); ++k)
    os << g.axial()[k] << "," << g.transverse()[k] << "," << g.weights()[k] << ","
       << gf.values[k] << "\n";
}

void dump_binary(const GridFunction& gf, std::ostream& os) {
  const Grid& g = *gf.grid;
  std::int64_t count = gf.size();
  std::int32_t sector = gf.sector;
  os.write(reinterpret_cast<const char*>(&count), sizeof count);
  os.write(reinterpret_cast<const char*>(&sector), sizeof sector);
  for (Eigen::Index k = 0; k < gf.size(); ++k) {
    double rec[4] = {g.axial()[k], g.transverse()[k], g.weights()[k], gf.values[k]};
    os.write(reinterpret_cast<const char*>(rec), sizeof rec);
  }
}

}  // namespace critlab

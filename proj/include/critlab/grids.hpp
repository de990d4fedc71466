#pragma once

#include "critlab/core_math.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace critlab {

enum class GridKind { Radial, Axi };

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Cell-centred finite-volume grid on a smoothly mapped coordinate.  Every node carries an
// axial coordinate s and a transverse coordinate rho, and the representative point is
// (s, rho, 0, ..., 0).  The radial grid stores r as s and rho = 0.
//
// A grid function in sector l stands for phi(s, rho) Y_l, with Y_l a spherical harmonic of
// degree l on S^{n-1} (radial) or S^{n-2} (axisymmetric).  The stiffness form of sector l is
// sum over faces of area/spacing * jump^2 plus the centrifugal term l(l+n-2)/r^2
// (radial) or l(l+n-3)/rho^2 (axisymmetric), and an outer Robin condition matching the
// decaying harmonic of that sector.
class Grid {
public:
  virtual ~Grid() = default;

  int n() const { return n_; }
  virtual GridKind kind() const = 0;
  Eigen::Index size() const { return weights_.size(); }

  const Vec& weights() const { return weights_; }
  const Vec& axial() const { return s_; }
  const Vec& transverse() const { return rho_; }
  // r on the radial grid, rho on the axisymmetric grid.
  const Vec& harmonic_radius() const { return harm_; }
  double radius(Eigen::Index k) const;
  std::vector<double> point(Eigen::Index k) const;

  int centrifugal_factor(int sector) const;
  const SpMat& stiffness(int sector) const;

  virtual std::vector<std::pair<std::string, std::string>> metadata() const = 0;

protected:
  explicit Grid(int n) : n_(n) {}
  virtual SpMat assemble(int sector) const = 0;

  int n_;
  Vec weights_, s_, rho_, harm_;

private:
  mutable std::mutex cache_mu_;
  mutable std::map<int, std::shared_ptr<SpMat>> cache_;
};

struct RadialGridSpec {
  int n = 6;
  int cells = 800;
  double core = 0.5;      // r = core * sinh(t)
  double r_max = 4096.0;
};

class RadialGrid final : public Grid {
public:
  explicit RadialGrid(const RadialGridSpec& spec);
  GridKind kind() const override { return GridKind::Radial; }
  const RadialGridSpec& spec() const { return spec_; }
  std::vector<std::pair<std::string, std::string>> metadata() const override;

private:
  SpMat assemble(int sector) const override;
  RadialGridSpec spec_;
  Vec face_r_;  // cells + 1 faces
};

struct AxiGridSpec {
  int n = 6;
  std::vector<double> foci{0.0};  // one or two axial concentration points, increasing
  std::vector<double> cores{0.5}; // length scale at each focus
  double extent = 4096.0;         // s in [-extent, extent], rho in [0, extent]
  int ns = 256;
  int nr = 128;
};

class AxiGrid final : public Grid {
public:
  explicit AxiGrid(const AxiGridSpec& spec);
  GridKind kind() const override { return GridKind::Axi; }
  const AxiGridSpec& spec() const { return spec_; }
  int ns() const { return spec_.ns; }
  int nr() const { return spec_.nr; }
  Eigen::Index index(int i, int j) const { return Eigen::Index(i) * spec_.nr + j; }
  const Vec& s_nodes() const { return s_nodes_; }
  const Vec& rho_nodes() const { return r_nodes_; }
  std::vector<std::pair<std::string, std::string>> metadata() const override;

private:
  SpMat assemble(int sector) const override;
  AxiGridSpec spec_;
  Vec s_nodes_, s_jac_;   // node positions and ds per cell (s'(tau) h)
  Vec r_nodes_, r_jac_;   // same for rho
  Vec r_faces_;           // nr + 1
  double s_lo_face_ = 0, s_hi_face_ = 0;
};

std::shared_ptr<const RadialGrid> make_radial_grid(const RadialGridSpec& spec);
std::shared_ptr<const AxiGrid> make_axi_grid(const AxiGridSpec& spec);
// Symmetric two-focus grid for the pair U[-a e1, 1], U[a e1, 1].
AxiGridSpec two_bubble_axi_spec(int n, double a, int ns, int nr, double extent_factor = 64.0,
                                double core = 0.5);

struct GridFunction {
  std::shared_ptr<const Grid> grid;
  Vec values;
  int sector = 0;

  Eigen::Index size() const { return values.size(); }
};

GridFunction zeros(std::shared_ptr<const Grid> grid, int sector = 0);
GridFunction sample(std::shared_ptr<const Grid> grid, const ScalarField& field, int sector = 0);

enum class BubbleComponent { Value, DLambda, DzAxial, DzPerp };

// Closed-form bubble quantity sampled on the grid.  The center must lie on the symmetry
// axis (at the origin for the radial grid).  DzPerp is the sector-1 reduced derivative in a
// transverse direction; on the radial grid DzAxial also lives in sector 1.
GridFunction sample_bubble(std::shared_ptr<const Grid> grid, const BubbleParams& b,
                           BubbleComponent comp);
int component_sector(GridKind kind, BubbleComponent comp);

double integrate(const GridFunction& gf);
double norm_Lq(const GridFunction& gf, double q);
double inner_L2(const GridFunction& a, const GridFunction& b);
double inner_H1(const GridFunction& a, const GridFunction& b);
double inner_weighted(const GridFunction& a, const GridFunction& b, const Vec& weight);
// Discrete -Delta in the sector's reduced coordinates: W^{-1} K u.
GridFunction laplacian_apply(const GridFunction& gf);

void check_same_grid(const GridFunction& a, const GridFunction& b);

// Node dump: "s,rho,weight,value" per line after a header.
void dump_csv(const GridFunction& gf, std::ostream& os);
// Binary dump: int64 count, int32 sector, then count records of 4 doubles (s, rho, w, value).
void dump_binary(const GridFunction& gf, std::ostream& os);

}  // namespace critlab

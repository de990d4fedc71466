#include "critlab/fitting.hpp"

#include "critlab/core_math.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace critlab {

namespace {

void check_sizes(const std::vector<double>& x, const std::vector<double>& y, size_t min_points) {
  if (x.size() != y.size()) throw InvalidParameter("fit: x and y differ in length");
  if (x.size() < min_points)
    throw InvalidParameter("fit needs at least " + std::to_string(min_points) + " points");
  for (size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidParameter("fit needs positive data");
}

std::vector<double> logs(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::log(v[i]);
  return out;
}

}  // namespace

double aic_score(double rss, int points, int parameters) {
  // Floor keeps exact fits comparable instead of -inf.
  const double r = std::max(rss / points, 1e-300);
  return points * std::log(r) + 2.0 * parameters;
}

std::vector<double> least_squares(const std::vector<std::vector<double>>& columns,
                                  const std::vector<double>& y, double* rss) {
  const Eigen::Index m = static_cast<Eigen::Index>(y.size());
  const Eigen::Index k = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd X(m, k);
  Eigen::VectorXd Y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Y[i] = y[i];
    for (Eigen::Index j = 0; j < k; ++j) X(i, j) = columns[j][i];
  }
  Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
  if (rss) *rss = (X * beta - Y).squaredNorm();
  return std::vector<double>(beta.data(), beta.data() + k);
}

ScalingModelFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  check_sizes(x, y, 2);
  std::vector<double> one(x.size(), 1.0);
  ScalingModelFit f;
  f.model = "power";
  auto b = least_squares({one, logs(x)}, logs(y), &f.rss);
  f.log_prefactor = b[0];
  f.exponent = b[1];
  f.parameters = 2;
  f.points = static_cast<int>(x.size());
  f.aic = aic_score(f.rss, f.points, f.parameters);
  return f;
}

ScalingModelFit fit_power_fixed_log(const std::vector<double>& x, const std::vector<double>& y,
                                    const std::vector<double>& L, double log_power) {
  check_sizes(x, y, 2);
  check_sizes(x, L, 2);
  std::vector<double> ly = logs(y), lL = logs(L);
  for (size_t i = 0; i < ly.size(); ++i) ly[i] -= log_power * lL[i];
  std::vector<double> one(x.size(), 1.0);
  ScalingModelFit f;
  f.model = "power_log_fixed";
  auto b = least_squares({one, logs(x)}, ly, &f.rss);
  f.log_prefactor = b[0];
  f.exponent = b[1];
  f.log_power = log_power;
  f.parameters = 2;
  f.points = static_cast<int>(x.size());
  f.aic = aic_score(f.rss, f.points, f.parameters);
  return f;
}

ScalingModelFit fit_power_free_log(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<double>& L) {
  check_sizes(x, y, 3);
  check_sizes(x, L, 3);
  std::vector<double> one(x.size(), 1.0);
  ScalingModelFit f;
  f.model = "power_log";
  auto b = least_squares({one, logs(x), logs(L)}, logs(y), &f.rss);
  f.log_prefactor = b[0];
  f.exponent = b[1];
  f.log_power = b[2];
  f.parameters = 3;
  f.points = static_cast<int>(x.size());
  f.aic = aic_score(f.rss, f.points, f.parameters);
  return f;
}

const ScalingModelFit& select_model(const ScalingModelFit& a, const ScalingModelFit& b) {
  return b.aic < a.aic ? b : a;
}

RateFit fit_exponential_rate(const std::vector<double>& s, const std::vector<double>& y) {
  if (s.size() != y.size() || s.size() < 2) throw InvalidParameter("rate fit needs >= 2 points");
  for (double v : y)
    if (!(v > 0.0)) throw InvalidParameter("rate fit needs positive data");
  std::vector<double> one(s.size(), 1.0);
  RateFit r;
  auto b = least_squares({one, s}, logs(y), &r.rss);
  r.log_prefactor = b[0];
  r.rate = -b[1];
  r.points = static_cast<int>(s.size());
  return r;
}

}  // namespace critlab

#include "critlab/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace critlab {

const GaussRule& gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int k = 0; k < order; ++k) {
    rule.nodes[k] = es.eigenvalues()(k);
    double v = es.eigenvectors()(0, k);
    rule.weights[k] = 2.0 * v * v;
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

double integrate_gl(const std::function<double(double)>& f, double a, double b, int panels,
                    int order) {
  const GaussRule& g = gauss_legendre(order);
  double h = (b - a) / panels;
  double total = 0.0;
  for (int k = 0; k < panels; ++k) {
    double lo = a + k * h;
    double mid = lo + 0.5 * h;
    double acc = 0.0;
    for (int i = 0; i < order; ++i) acc += g.weights[i] * f(mid + 0.5 * h * g.nodes[i]);
    total += 0.5 * h * acc;
  }
  return total;
}

double integrate_log_panels(const std::function<double(double)>& f, double a, double b,
                            int panels, int order) {
  if (!(a > 0.0 && b > a)) throw std::invalid_argument("integrate_log_panels: need 0 < a < b");
  auto g = [&](double u) {
    double t = std::exp(u);
    return f(t) * t;
  };
  return integrate_gl(g, std::log(a), std::log(b), panels, order);
}

}  // namespace critlab

#pragma once

#include <functional>
#include <vector>

namespace critlab {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Golub-Welsch; cached per order.
const GaussRule& gauss_legendre(int order);

// Composite Gauss-Legendre on [a, b] with equal panels.
double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int panels = 16, int order = 16);

// Integral over [a, b] with 0 < a < b using panels equally spaced in log t.
double integrate_log_panels(const std::function<double(double)>& f, double a, double b,
                            int panels = 32, int order = 16);

}  // namespace critlab

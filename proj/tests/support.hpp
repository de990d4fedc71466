#pragma once

#include <cmath>
#include <random>
#include <vector>

namespace critlab::test {

// Fixed-seed draws for property tests.
class Gen {
public:
  explicit Gen(unsigned long seed) : rng_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  std::vector<double> point(int n, double radius) {
    std::vector<double> x(n);
    for (auto& v : x) v = uniform(-radius, radius);
    return x;
  }

private:
  std::mt19937_64 rng_;
};

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace critlab::test

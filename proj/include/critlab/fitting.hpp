#pragma once

#include <string>
#include <vector>

namespace critlab {

// y = A x^b L^c, fitted in logs.  L is a caller-supplied positive factor per point
// (for example log R or log(1/Q)); c is either fixed or free.
struct ScalingModelFit {
  std::string model;
  double log_prefactor = 0.0;
  double exponent = 0.0;
  double log_power = 0.0;
  double rss = 0.0;   // residual sum of squares in log y
  double aic = 0.0;
  int parameters = 0;
  int points = 0;
};

double aic_score(double rss, int points, int parameters);

ScalingModelFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);
ScalingModelFit fit_power_fixed_log(const std::vector<double>& x, const std::vector<double>& y,
                                    const std::vector<double>& L, double log_power);
ScalingModelFit fit_power_free_log(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<double>& L);
// Lower AIC wins; ties go to the first argument.
const ScalingModelFit& select_model(const ScalingModelFit& a, const ScalingModelFit& b);

struct RateFit {
  double rate = 0.0;       // y ~ A exp(-rate s)
  double log_prefactor = 0.0;
  double rss = 0.0;
  int points = 0;
};

RateFit fit_exponential_rate(const std::vector<double>& s, const std::vector<double>& y);

// Ordinary least squares for y ~ X beta; returns beta and sets rss.
std::vector<double> least_squares(const std::vector<std::vector<double>>& columns,
                                  const std::vector<double>& y, double* rss = nullptr);

}  // namespace critlab

#pragma once

#include <span>

namespace fnr {

/// Ordinary least-squares line y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;

  double at(double x) const { return intercept + slope * x; }
};

/// Fits a line through (xs[k], ys[k]). Needs at least two points and at least
/// two distinct x values; throws ConfigError otherwise.
LineFit fit_line(std::span<const double> xs, std::span<const double> ys);

/// Least-squares extrapolation of the series to `target`.
double extrapolate(std::span<const double> xs, std::span<const double> ys, double target);

}  // namespace fnr

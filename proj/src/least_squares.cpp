#include "fnr/least_squares.hpp"

#include "fnr/error.hpp"

namespace fnr {

LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ConfigError("fit_line: xs and ys differ in length");
  if (xs.size() < 2) throw ConfigError("fit_line: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mean_x += xs[k];
    mean_y += ys[k];
  }
  mean_x /= n;
  mean_y /= n;
  // Centered sums keep the fit well conditioned for large frame indices.
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = xs[k] - mean_x;
    sxx += dx * dx;
    sxy += dx * (ys[k] - mean_y);
  }
  if (sxx == 0.0) throw ConfigError("fit_line: all x values are identical");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  return fit;
}

double extrapolate(std::span<const double> xs, std::span<const double> ys, double target) {
  const LineFit fit = fit_line(xs, ys);
  // Evaluate relative to the x mean: exact for exactly-linear integer series.
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mean_x += xs[k];
    mean_y += ys[k];
  }
  mean_x /= static_cast<double>(xs.size());
  mean_y /= static_cast<double>(ys.size());
  return mean_y + fit.slope * (target - mean_x);
}

}  // namespace fnr

#pragma once
// Cox proportional-hazards regression (Breslow ties) for the survival metric.

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fnr {

struct SurvivalSample {
  std::vector<double> covariates;
  double duration = 0.0;
  bool event = false;  ///< false = censored
};

struct CoxFitOptions {
  double ridge = 1e-4;       ///< penalty (ridge/2)*|beta|^2 on standardized coefficients
  double tolerance = 1e-8;   ///< max-norm of the per-event gradient
  int max_iterations = 100;
};

class CoxModel {
 public:
  std::vector<std::string> names;
  std::vector<double> mean;   ///< standardization offsets
  std::vector<double> scale;  ///< standardization scales (0 for constant covariates)
  std::vector<double> beta;   ///< coefficients on standardized covariates
  /// Breslow cumulative baseline hazard at each distinct event time, ascending.
  std::vector<std::pair<double, double>> baseline;
  int iterations = 0;
  std::vector<std::string> warnings;

  bool fitted() const { return !beta.empty() || !baseline.empty(); }
  std::size_t dimension() const { return mean.size(); }

  /// beta^T x on standardized covariates.
  double linear_predictor(std::span<const double> covariates) const;
  /// Coefficients on the original covariate scale.
  std::vector<double> raw_coefficients() const;
  /// H0(t): step function, 0 before the first event time.
  double cumulative_hazard(double t) const;

  std::string to_json() const;
  static CoxModel from_json(const std::string& text);
};

/// Maximizes the penalized partial likelihood by Newton iterations with step
/// halving. Throws FitError with fewer than two events or on non-convergence.
CoxModel fit_cox(std::span<const SurvivalSample> samples, const CoxFitOptions& options = {},
                 std::vector<std::string> names = {});

/// S(horizon | x) = exp(-H0(horizon) * exp(beta^T x)). Throws FitError when
/// the model is not fitted, ConfigError on a dimension mismatch.
double survival_score(const CoxModel& model, std::span<const double> covariates, double horizon);

/// Unpenalized Breslow log partial likelihood for raw-scale coefficients.
double cox_log_partial_likelihood(std::span<const SurvivalSample> samples,
                                  std::span<const double> raw_beta);

}  // namespace fnr

#include "fnr/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "fnr/error.hpp"

namespace fnr {

namespace {

struct Standardized {
  std::vector<std::vector<double>> x;  // active covariates only
  std::vector<double> duration;
  std::vector<int> event;
  std::vector<std::size_t> order;      // indices sorted by duration descending
};

// Solves A x = b for symmetric positive definite A (row-major p x p).
bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t p,
                    std::vector<double>& x) {
  for (std::size_t j = 0; j < p; ++j) {
    double d = a[j * p + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * p + k] * a[j * p + k];
    if (!(d > 0.0)) return false;
    const double l = std::sqrt(d);
    a[j * p + j] = l;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / l;
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * p + k] * b[k];
    b[i] = s / a[i * p + i];
  }
  for (std::size_t i = p; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < p; ++k) s -= a[k * p + i] * b[k];
    b[i] = s / a[i * p + i];
  }
  x = std::move(b);
  return true;
}

struct Evaluation {
  double loglik = 0.0;            // per event, unpenalized
  std::vector<double> gradient;   // per event, unpenalized
  std::vector<double> hessian;    // per event, unpenalized (negative semidefinite)
};

// Breslow partial likelihood with its derivatives. Samples are walked from
// the longest duration down so risk-set sums accumulate; all samples tied at
// a duration enter the risk set before its events are scored.
Evaluation evaluate(const Standardized& data, std::span<const double> beta, bool derivatives) {
  const std::size_t p = beta.size();
  const std::size_t n = data.duration.size();
  std::vector<double> eta(n, 0.0);
  double eta_max = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t k = 0; k < p; ++k) e += beta[k] * data.x[i][k];
    eta[i] = e;
    eta_max = std::max(eta_max, e);
  }
  if (n == 0) eta_max = 0.0;

  Evaluation ev;
  ev.gradient.assign(p, 0.0);
  ev.hessian.assign(p * p, 0.0);
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0), s2(p * p, 0.0);
  std::size_t events = 0;

  std::size_t pos = 0;
  while (pos < n) {
    const double t = data.duration[data.order[pos]];
    std::size_t end = pos;
    while (end < n && data.duration[data.order[end]] == t) {
      const std::size_t i = data.order[end];
      const double w = std::exp(eta[i] - eta_max);
      s0 += w;
      if (derivatives) {
        for (std::size_t a = 0; a < p; ++a) {
          s1[a] += w * data.x[i][a];
          for (std::size_t b = 0; b <= a; ++b) s2[a * p + b] += w * data.x[i][a] * data.x[i][b];
        }
      }
      ++end;
    }
    for (std::size_t q = pos; q < end; ++q) {
      const std::size_t i = data.order[q];
      if (!data.event[i]) continue;
      ++events;
      ev.loglik += (eta[i] - eta_max) - std::log(s0);
      if (derivatives) {
        for (std::size_t a = 0; a < p; ++a) {
          const double ma = s1[a] / s0;
          ev.gradient[a] += data.x[i][a] - ma;
          for (std::size_t b = 0; b <= a; ++b) {
            ev.hessian[a * p + b] -= s2[a * p + b] / s0 - ma * (s1[b] / s0);
          }
        }
      }
    }
    pos = end;
  }
  const double scale = events > 0 ? 1.0 / static_cast<double>(events) : 1.0;
  ev.loglik *= scale;
  for (auto& g : ev.gradient) g *= scale;
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      ev.hessian[a * p + b] *= scale;
      ev.hessian[b * p + a] = ev.hessian[a * p + b];
    }
  }
  return ev;
}

}  // namespace

double CoxModel::linear_predictor(std::span<const double> covariates) const {
  if (covariates.size() != mean.size()) {
    throw ConfigError("cox: expected " + std::to_string(mean.size()) + " covariates, got " +
                      std::to_string(covariates.size()));
  }
  double eta = 0.0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    if (scale[k] > 0.0) eta += beta[k] * (covariates[k] - mean[k]) / scale[k];
  }
  return eta;
}

std::vector<double> CoxModel::raw_coefficients() const {
  std::vector<double> raw(beta.size(), 0.0);
  for (std::size_t k = 0; k < beta.size(); ++k) raw[k] = scale[k] > 0.0 ? beta[k] / scale[k] : 0.0;
  return raw;
}

double CoxModel::cumulative_hazard(double t) const {
  auto it = std::upper_bound(baseline.begin(), baseline.end(), t,
                             [](double x, const auto& entry) { return x < entry.first; });
  if (it == baseline.begin()) return 0.0;
  return std::prev(it)->second;
}

std::string CoxModel::to_json() const {
  nlohmann::json j;
  j["format"] = "fnr-cox-model";
  j["version"] = 1;
  j["names"] = names;
  j["mean"] = mean;
  j["scale"] = scale;
  j["beta"] = beta;
  j["baseline"] = baseline;
  j["iterations"] = iterations;
  j["warnings"] = warnings;
  return j.dump(2);
}

CoxModel CoxModel::from_json(const std::string& text) {
  CoxModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "fnr-cox-model") throw ParseError("not a cox model file");
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported cox model version");
    m.names = j.at("names").get<std::vector<std::string>>();
    m.mean = j.at("mean").get<std::vector<double>>();
    m.scale = j.at("scale").get<std::vector<double>>();
    m.beta = j.at("beta").get<std::vector<double>>();
    m.baseline = j.at("baseline").get<std::vector<std::pair<double, double>>>();
    m.iterations = j.value("iterations", 0);
    m.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("cox model: ") + e.what());
  }
  if (m.scale.size() != m.mean.size() || m.beta.size() != m.mean.size()) {
    throw ParseError("cox model: inconsistent dimensions");
  }
  return m;
}

CoxModel fit_cox(std::span<const SurvivalSample> samples, const CoxFitOptions& options,
                 std::vector<std::string> names) {
  if (samples.empty()) throw FitError("cox: no samples");
  const std::size_t dim = samples.front().covariates.size();
  std::size_t events = 0;
  for (const auto& s : samples) {
    if (s.covariates.size() != dim) throw FitError("cox: covariate vectors differ in length");
    if (!(s.duration >= 0.0)) throw FitError("cox: durations must be >= 0");
    for (double x : s.covariates) {
      if (!std::isfinite(x)) throw FitError("cox: covariates must be finite");
    }
    events += s.event;
  }
  if (events == 0) throw FitError("cox: no events");
  if (events < 2) throw FitError("cox: need at least two events");
  if (!names.empty() && names.size() != dim) throw FitError("cox: names do not match covariates");

  CoxModel model;
  model.names = std::move(names);
  model.mean.assign(dim, 0.0);
  model.scale.assign(dim, 0.0);
  model.beta.assign(dim, 0.0);
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < dim; ++k) {
    double m = 0.0;
    for (const auto& s : samples) m += s.covariates[k];
    m /= n;
    double v = 0.0;
    for (const auto& s : samples) v += (s.covariates[k] - m) * (s.covariates[k] - m);
    model.mean[k] = m;
    model.scale[k] = std::sqrt(v / n);
    if (!(model.scale[k] > 1e-12 * std::max(1.0, std::fabs(m)))) {
      model.scale[k] = 0.0;
      model.warnings.push_back("covariate " +
                               (model.names.empty() ? std::to_string(k) : model.names[k]) +
                               " is constant; coefficient fixed at 0");
    }
  }
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < dim; ++k) {
    if (model.scale[k] > 0.0) active.push_back(k);
  }
  const std::size_t p = active.size();

  Standardized data;
  data.x.resize(samples.size());
  data.duration.resize(samples.size());
  data.event.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    data.x[i].resize(p);
    for (std::size_t a = 0; a < p; ++a) {
      const std::size_t k = active[a];
      data.x[i][a] = (samples[i].covariates[k] - model.mean[k]) / model.scale[k];
    }
    data.duration[i] = samples[i].duration;
    data.event[i] = samples[i].event ? 1 : 0;
  }
  data.order.resize(samples.size());
  std::iota(data.order.begin(), data.order.end(), std::size_t{0});
  std::stable_sort(data.order.begin(), data.order.end(), [&](std::size_t a, std::size_t b) {
    return data.duration[a] > data.duration[b];
  });

  const double lambda = options.ridge;
  const auto objective = [&](const Evaluation& ev, std::span<const double> b) {
    double pen = 0.0;
    for (double x : b) pen += x * x;
    return ev.loglik - 0.5 * lambda * pen;
  };

  std::vector<double> beta(p, 0.0);
  bool converged = false;
  int iter = 0;
  double grad_norm = INFINITY;
  if (p == 0) {
    converged = true;
  }
  while (!converged && iter < options.max_iterations) {
    Evaluation ev = evaluate(data, beta, true);
    std::vector<double> grad(p), neg_hess(p * p);
    grad_norm = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
      grad[a] = ev.gradient[a] - lambda * beta[a];
      grad_norm = std::max(grad_norm, std::fabs(grad[a]));
      for (std::size_t b = 0; b < p; ++b) neg_hess[a * p + b] = -ev.hessian[a * p + b];
      neg_hess[a * p + a] += lambda;
    }
    if (grad_norm < options.tolerance) {
      converged = true;
      break;
    }
    std::vector<double> step;
    if (!cholesky_solve(neg_hess, grad, p, step)) {
      throw FitError("cox: Hessian is not negative definite at iteration " + std::to_string(iter));
    }
    const double current = objective(ev, beta);
    double t = 1.0;
    std::vector<double> trial(p);
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      for (std::size_t a = 0; a < p; ++a) trial[a] = beta[a] + t * step[a];
      const Evaluation tv = evaluate(data, trial, false);
      if (objective(tv, trial) >= current) {
        improved = true;
        break;
      }
    }
    ++iter;
    if (!improved) {
      // The objective is flat to machine precision along the Newton
      // direction; accept only if the gradient is already negligible.
      if (grad_norm < 1e3 * options.tolerance) {
        converged = true;
        break;
      }
      throw FitError("cox: line search failed at iteration " + std::to_string(iter) +
                     ", gradient max-norm " + std::to_string(grad_norm));
    }
    beta = trial;
  }
  if (!converged) {
    const Evaluation ev = evaluate(data, beta, true);
    grad_norm = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
      grad_norm = std::max(grad_norm, std::fabs(ev.gradient[a] - lambda * beta[a]));
    }
    if (grad_norm >= options.tolerance) {
      throw FitError("cox: no convergence after " + std::to_string(iter) +
                     " iterations, gradient max-norm " + std::to_string(grad_norm));
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    if (!std::isfinite(beta[a])) throw FitError("cox: non-finite coefficient");
    model.beta[active[a]] = beta[a];
  }
  model.iterations = iter;

  // Breslow baseline: jump 1/sum_{risk set} exp(eta) per event.
  std::vector<double> eta(samples.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t a = 0; a < p; ++a) eta[i] += beta[a] * data.x[i][a];
  }
  double risk = 0.0;
  std::vector<std::pair<double, double>> jumps;  // descending time
  std::size_t pos = 0;
  while (pos < data.order.size()) {
    const double t = data.duration[data.order[pos]];
    std::size_t end = pos;
    int d = 0;
    while (end < data.order.size() && data.duration[data.order[end]] == t) {
      risk += std::exp(eta[data.order[end]]);
      d += data.event[data.order[end]];
      ++end;
    }
    if (d > 0) jumps.emplace_back(t, d / risk);
    pos = end;
  }
  double cumulative = 0.0;
  for (auto it = jumps.rbegin(); it != jumps.rend(); ++it) {
    cumulative += it->second;
    model.baseline.emplace_back(it->first, cumulative);
  }
  return model;
}

double survival_score(const CoxModel& model, std::span<const double> covariates, double horizon) {
  if (!model.fitted()) throw FitError("cox: model is not fitted");
  if (!(horizon > 0.0)) throw ConfigError("cox: horizon must be > 0");
  const double eta = model.linear_predictor(covariates);
  return std::exp(-model.cumulative_hazard(horizon) * std::exp(eta));
}

double cox_log_partial_likelihood(std::span<const SurvivalSample> samples,
                                  std::span<const double> raw_beta) {
  Standardized data;
  const std::size_t p = raw_beta.size();
  for (const auto& s : samples) {
    if (s.covariates.size() != p) throw ConfigError("cox: covariate length mismatch");
    data.x.push_back(s.covariates);
    data.duration.push_back(s.duration);
    data.event.push_back(s.event ? 1 : 0);
  }
  data.order.resize(samples.size());
  std::iota(data.order.begin(), data.order.end(), std::size_t{0});
  std::stable_sort(data.order.begin(), data.order.end(), [&](std::size_t a, std::size_t b) {
    return data.duration[a] > data.duration[b];
  });
  std::size_t events = 0;
  for (int e : data.event) events += e;
  return evaluate(data, raw_beta, false).loglik * static_cast<double>(std::max<std::size_t>(events, 1));
}

}  // namespace fnr

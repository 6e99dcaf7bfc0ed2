#include "deltaope/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "deltaope/errors.hpp"

namespace deltaope {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kIps: return "ips";
    case Method::kSnips: return "snips";
    case Method::kBetaIps: return "beta_ips";
    case Method::kDeltaIps: return "delta_ips";
    case Method::kDeltaSnips: return "delta_snips";
    case Method::kDeltaBetaIps: return "delta_beta_ips";
  }
  return "unknown";
}

Method method_from_string(std::string_view tag) {
  for (Method m : kAllMethods) {
    if (to_string(m) == tag) return m;
  }
  throw std::invalid_argument("unknown estimator '" + std::string(tag) + "'");
}

bool is_pairwise(Method method) {
  return method == Method::kDeltaIps || method == Method::kDeltaSnips ||
         method == Method::kDeltaBetaIps;
}

namespace {

void check_sizes(std::size_t n, std::initializer_list<std::size_t> others) {
  for (std::size_t s : others) {
    if (s != n) throw std::invalid_argument("weight and reward spans differ in length");
  }
  if (n < 2) {
    throw InsufficientDataError(fmt::format("estimator needs at least 2 samples, got {}", n));
  }
}

struct MeanVar {
  double mean;
  double variance_of_mean;
};

// Two-pass mean and (n-1)-normalised sample variance, divided by n.
template <typename Term>
MeanVar mean_and_variance(std::size_t n, Term term) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += term(i);
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = term(i) - mean;
    ss += dev * dev;
  }
  const double nd = static_cast<double>(n);
  return {mean, ss / (nd - 1.0) / nd};
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// g^T S g / n, where S is the (n-1) sample covariance of the per-sample columns.
template <std::size_t K, typename Column>
double delta_method_variance(std::size_t n, const std::array<double, K>& g, Column column) {
  std::array<double, K> means{};
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = column(i);
    for (std::size_t k = 0; k < K; ++k) means[k] += v[k];
  }
  for (auto& m : means) m /= static_cast<double>(n);
  std::array<std::array<double, K>, K> cov{};
  for (std::size_t i = 0; i < n; ++i) {
    auto v = column(i);
    for (std::size_t k = 0; k < K; ++k) v[k] -= means[k];
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = j; k < K; ++k) cov[j][k] += v[j] * v[k];
    }
  }
  const double nd = static_cast<double>(n);
  double q = 0.0;
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      const double c = j <= k ? cov[j][k] : cov[k][j];
      q += g[j] * g[k] * c / (nd - 1.0);
    }
  }
  return std::max(q, 0.0) / nd;
}

EstimateReport make_report(Method m, const MeanVar& mv, std::size_t n, double baseline = 0.0,
                           bool degenerate = false) {
  return EstimateReport{m, mv.mean, std::max(mv.variance_of_mean, 0.0), n, baseline, degenerate};
}

struct Ratio {
  double estimate;
  double mean_weight;
  double ips;
};

Ratio self_normalised(std::span<const double> w, std::span<const double> r, const char* label) {
  double sum_w = 0.0;
  double sum_wr = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sum_w += w[i];
    sum_wr += w[i] * r[i];
  }
  if (!(sum_w > 0.0)) {
    throw DegenerateWeightsError(fmt::format("{} importance weights sum to {}", label, sum_w));
  }
  const double nd = static_cast<double>(w.size());
  return {sum_wr / sum_w, sum_w / nd, sum_wr / nd};
}

}  // namespace

WeightStats importance_weights(const LoggedDataset& dataset, const Policy& policy,
                               const EstimatorOptions& options) {
  if (policy.kind() != dataset.kind()) {
    throw std::invalid_argument("policy and dataset action kinds differ");
  }
  WeightStats stats;
  stats.weights.resize(dataset.size());
  const auto logging = dataset.logging_propensities();
  if (dataset.kind() == ActionKind::kDiscrete) {
    const SoftmaxPolicy& pi = policy.softmax();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const double p0 = std::max(logging[i], options.min_propensity);
      if (!(p0 > 0.0)) throw SupportViolationError(fmt::format("sample {}: zero propensity", i));
      stats.weights[i] = pi.probability(dataset.context_id(i), dataset.discrete_action(i)) / p0;
    }
  } else {
    const GaussianPolicy& pi = policy.gaussian();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const double p0 = std::max(logging[i], options.min_propensity);
      if (!(p0 > 0.0)) throw SupportViolationError(fmt::format("sample {}: zero propensity", i));
      stats.weights[i] = std::exp(pi.log_density(dataset.continuous_action(i)) - std::log(p0));
    }
  }
  stats.mean_weight = mean_of(stats.weights);
  return stats;
}

EstimateReport ips_from_weights(std::span<const double> w, std::span<const double> r) {
  check_sizes(w.size(), {r.size()});
  return make_report(Method::kIps,
                     mean_and_variance(w.size(), [&](std::size_t i) { return w[i] * r[i]; }),
                     w.size());
}

EstimateReport snips_from_weights(std::span<const double> w, std::span<const double> r) {
  check_sizes(w.size(), {r.size()});
  const Ratio ratio = self_normalised(w, r, "target");
  const std::array<double, 2> g = {1.0 / ratio.mean_weight,
                                   -ratio.ips / (ratio.mean_weight * ratio.mean_weight)};
  const double var = delta_method_variance(
      w.size(), g, [&](std::size_t i) { return std::array<double, 2>{w[i] * r[i], w[i]}; });
  return EstimateReport{Method::kSnips, ratio.estimate, var, w.size(), 0.0, false};
}

double pointwise_beta_from_weights(std::span<const double> w, std::span<const double> r) {
  check_sizes(w.size(), {r.size()});
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double c = w[i] * w[i] - w[i];
    num += c * r[i];
    den += c;
  }
  if (den == 0.0) throw DegenerateBaselineError("sum(w^2 - w) is zero");
  return num / den;
}

EstimateReport beta_ips_from_weights(std::span<const double> w, std::span<const double> r) {
  check_sizes(w.size(), {r.size()});
  double beta = 0.0;
  bool degenerate = false;
  try {
    beta = pointwise_beta_from_weights(w, r);
  } catch (const DegenerateBaselineError&) {
    degenerate = true;
  }
  const auto mv =
      mean_and_variance(w.size(), [&](std::size_t i) { return beta + w[i] * (r[i] - beta); });
  return make_report(Method::kBetaIps, mv, w.size(), beta, degenerate);
}

EstimateReport delta_ips_from_weights(std::span<const double> w_target,
                                      std::span<const double> w_production,
                                      std::span<const double> r) {
  check_sizes(r.size(), {w_target.size(), w_production.size()});
  const auto mv = mean_and_variance(
      r.size(), [&](std::size_t i) { return (w_target[i] - w_production[i]) * r[i]; });
  return make_report(Method::kDeltaIps, mv, r.size());
}

EstimateReport delta_snips_from_weights(std::span<const double> w_target,
                                        std::span<const double> w_production,
                                        std::span<const double> r) {
  check_sizes(r.size(), {w_target.size(), w_production.size()});
  const Ratio t = self_normalised(w_target, r, "target");
  const Ratio p = self_normalised(w_production, r, "production");
  const std::array<double, 4> g = {1.0 / t.mean_weight, -t.ips / (t.mean_weight * t.mean_weight),
                                   -1.0 / p.mean_weight, p.ips / (p.mean_weight * p.mean_weight)};
  const double var = delta_method_variance(r.size(), g, [&](std::size_t i) {
    return std::array<double, 4>{w_target[i] * r[i], w_target[i], w_production[i] * r[i],
                                 w_production[i]};
  });
  return EstimateReport{Method::kDeltaSnips, t.estimate - p.estimate, var, r.size(), 0.0, false};
}

double optimal_beta_pairwise_from_weights(std::span<const double> w_target,
                                          std::span<const double> w_production,
                                          std::span<const double> r) {
  check_sizes(r.size(), {w_target.size(), w_production.size()});
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = w_target[i] - w_production[i];
    num += d * d * r[i];
    den += d * d;
  }
  if (den == 0.0) {
    throw DegenerateBaselineError("target and production agree on every logged action");
  }
  return num / den;
}

EstimateReport delta_beta_ips_from_weights(std::span<const double> w_target,
                                           std::span<const double> w_production,
                                           std::span<const double> r) {
  check_sizes(r.size(), {w_target.size(), w_production.size()});
  double beta = 0.0;
  bool degenerate = false;
  try {
    beta = optimal_beta_pairwise_from_weights(w_target, w_production, r);
  } catch (const DegenerateBaselineError&) {
    degenerate = true;
  }
  const auto mv = mean_and_variance(r.size(), [&](std::size_t i) {
    return (w_target[i] - w_production[i]) * (r[i] - beta);
  });
  return make_report(Method::kDeltaBetaIps, mv, r.size(), beta, degenerate);
}

EstimateReport ips(const LoggedDataset& dataset, const Policy& target,
                   const EstimatorOptions& options) {
  return ips_from_weights(importance_weights(dataset, target, options).weights, dataset.rewards());
}

EstimateReport snips(const LoggedDataset& dataset, const Policy& target,
                     const EstimatorOptions& options) {
  return snips_from_weights(importance_weights(dataset, target, options).weights,
                            dataset.rewards());
}

EstimateReport beta_ips(const LoggedDataset& dataset, const Policy& target,
                        const EstimatorOptions& options) {
  return beta_ips_from_weights(importance_weights(dataset, target, options).weights,
                               dataset.rewards());
}

EstimateReport delta_ips(const LoggedDataset& dataset, const Policy& target,
                         const Policy& production, const EstimatorOptions& options) {
  return delta_ips_from_weights(importance_weights(dataset, target, options).weights,
                                importance_weights(dataset, production, options).weights,
                                dataset.rewards());
}

EstimateReport delta_snips(const LoggedDataset& dataset, const Policy& target,
                           const Policy& production, const EstimatorOptions& options) {
  return delta_snips_from_weights(importance_weights(dataset, target, options).weights,
                                  importance_weights(dataset, production, options).weights,
                                  dataset.rewards());
}

EstimateReport delta_beta_ips(const LoggedDataset& dataset, const Policy& target,
                              const Policy& production, const EstimatorOptions& options) {
  return delta_beta_ips_from_weights(importance_weights(dataset, target, options).weights,
                                     importance_weights(dataset, production, options).weights,
                                     dataset.rewards());
}

double optimal_beta_pairwise(const LoggedDataset& dataset, const Policy& target,
                             const Policy& production, const EstimatorOptions& options) {
  return optimal_beta_pairwise_from_weights(
      importance_weights(dataset, target, options).weights,
      importance_weights(dataset, production, options).weights, dataset.rewards());
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument(fmt::format("confidence level {} outside (0, 1)", level));
  }
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 * (1.0 + level));
}

ConfidenceInterval confidence_interval(const EstimateReport& report, double level) {
  const double half = normal_critical_value(level) * std::sqrt(std::max(report.variance, 0.0));
  return {report.estimate - half, report.estimate + half, level};
}

nlohmann::json to_json(const EstimateReport& report, double level) {
  const ConfidenceInterval ci = confidence_interval(report, level);
  return nlohmann::json{{"method", std::string(to_string(report.method))},
                        {"estimate", report.estimate},
                        {"variance", report.variance},
                        {"n", report.n},
                        {"baseline", report.baseline},
                        {"ci_lower", ci.lower},
                        {"ci_upper", ci.upper},
                        {"level", level}};
}

}  // namespace deltaope

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "deltaope/dataset.hpp"
#include "deltaope/policy.hpp"

namespace deltaope {

enum class Method { kIps, kSnips, kBetaIps, kDeltaIps, kDeltaSnips, kDeltaBetaIps };

inline constexpr Method kAllMethods[] = {Method::kIps,      Method::kSnips,      Method::kBetaIps,
                                         Method::kDeltaIps, Method::kDeltaSnips, Method::kDeltaBetaIps};

std::string_view to_string(Method method);
// Throws std::invalid_argument for an unknown tag.
Method method_from_string(std::string_view tag);
bool is_pairwise(Method method);

struct EstimateReport {
  Method method = Method::kIps;
  double estimate = 0.0;
  // Variance of the estimate itself: sample variance of per-sample terms / n.
  double variance = 0.0;
  std::size_t n = 0;
  double baseline = 0.0;
  // Set when the baseline ratio had a zero denominator and fell back to 0.
  bool degenerate_baseline = false;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;

  double width() const noexcept { return upper - lower; }
  bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

struct WeightStats {
  double mean_weight = 0.0;
  std::vector<double> weights;
};

struct EstimatorOptions {
  // Logging propensities below this floor are raised to it. Zero disables flooring.
  double min_propensity = 0.0;
};

// w_i = pi(a_i|x_i) / pi_0(a_i|x_i), using the logged propensity for pi_0.
WeightStats importance_weights(const LoggedDataset& dataset, const Policy& policy,
                               const EstimatorOptions& options = {});

// Weight-level estimators. Spans must have equal length n >= 2.
EstimateReport ips_from_weights(std::span<const double> w, std::span<const double> r);
EstimateReport snips_from_weights(std::span<const double> w, std::span<const double> r);
EstimateReport beta_ips_from_weights(std::span<const double> w, std::span<const double> r);
EstimateReport delta_ips_from_weights(std::span<const double> w_target,
                                      std::span<const double> w_production,
                                      std::span<const double> r);
EstimateReport delta_snips_from_weights(std::span<const double> w_target,
                                        std::span<const double> w_production,
                                        std::span<const double> r);
EstimateReport delta_beta_ips_from_weights(std::span<const double> w_target,
                                           std::span<const double> w_production,
                                           std::span<const double> r);

// sum((w^2 - w) r) / sum(w^2 - w). Throws DegenerateBaselineError on a zero denominator.
double pointwise_beta_from_weights(std::span<const double> w, std::span<const double> r);
// sum(d^2 r) / sum(d^2) with d = w_target - w_production.
// Throws DegenerateBaselineError when every d is zero.
double optimal_beta_pairwise_from_weights(std::span<const double> w_target,
                                          std::span<const double> w_production,
                                          std::span<const double> r);

EstimateReport ips(const LoggedDataset& dataset, const Policy& target,
                   const EstimatorOptions& options = {});
EstimateReport snips(const LoggedDataset& dataset, const Policy& target,
                     const EstimatorOptions& options = {});
EstimateReport beta_ips(const LoggedDataset& dataset, const Policy& target,
                        const EstimatorOptions& options = {});
EstimateReport delta_ips(const LoggedDataset& dataset, const Policy& target,
                         const Policy& production, const EstimatorOptions& options = {});
EstimateReport delta_snips(const LoggedDataset& dataset, const Policy& target,
                           const Policy& production, const EstimatorOptions& options = {});
EstimateReport delta_beta_ips(const LoggedDataset& dataset, const Policy& target,
                              const Policy& production, const EstimatorOptions& options = {});
double optimal_beta_pairwise(const LoggedDataset& dataset, const Policy& target,
                             const Policy& production, const EstimatorOptions& options = {});

// Two-sided standard normal quantile z_{(1+level)/2}.
double normal_critical_value(double level);

// Normal-approximation interval estimate +- z * sqrt(variance).
ConfidenceInterval confidence_interval(const EstimateReport& report, double level);

// {method, estimate, variance, n, baseline, ci_lower, ci_upper, level}
nlohmann::json to_json(const EstimateReport& report, double level);

}  // namespace deltaope

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "json.hpp"

#include "deltaope/estimators.hpp"
#include "deltaope/simulators.hpp"

namespace deltaope {

enum class Sign { kNegative = -1, kZero = 0, kPositive = 1 };

Sign sign_of(double v) noexcept;

std::vector<std::size_t> default_sample_sizes();

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::vector<std::size_t> sample_sizes = default_sample_sizes();
  std::size_t n_trials = 1000;
  std::vector<Method> estimators = {std::begin(kAllMethods), std::end(kAllMethods)};
  double ci_level = 0.95;
  std::uint64_t base_seed = 0;
};

// Flat JSON: the environment keys plus optional `sample_sizes`, `n_trials`,
// `estimators`, `ci_level` and `base_seed`. Throws ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

struct CellMetrics {
  Method estimator = Method::kIps;
  std::size_t n = 0;
  double mse = 0.0;
  // Pairwise estimators only.
  std::optional<double> mean_ci_width;
  double power = 0.0;
  double mean_estimate = 0.0;
  std::size_t n_trials = 0;
  std::size_t n_failed = 0;
  // Monte-Carlo standard errors of the metrics above.
  double se_mse = 0.0;
  std::optional<double> se_ci_width;
  double se_power = 0.0;
  double se_estimate = 0.0;
};

struct ExperimentResult {
  double true_delta = 0.0;
  // Ordered by estimator (config order), then sample size.
  std::vector<CellMetrics> cells;

  const CellMetrics& cell(Method estimator, std::size_t n) const;
  bool all_failed() const;
};

// Disjoint CIs at `level` whose t-minus-p ordering matches the true sign. Under a
// zero true difference any disjoint pair counts, so the rate is the false-positive rate.
bool detect_pointwise(const EstimateReport& report_target, const EstimateReport& report_production,
                      double level, Sign true_delta_sign);

// CI at `level` excludes 0 and sign(estimate) matches; under a zero truth any exclusion counts.
bool detect_pairwise(const EstimateReport& report, Sign true_delta_sign, double level);

// Runs n_trials replications. Trial i simulates one log with seed base_seed + i and
// evaluates every sample size on its prefix. Results do not depend on `parallelism`.
ExperimentResult run_experiment(const ExperimentConfig& config, unsigned parallelism = 1);
ExperimentResult run_experiment(const ExperimentConfig& config, const Environment& env,
                                unsigned parallelism = 1);

// Header `estimator,n,mse,mean_ci_width,power,mean_estimate,n_trials,n_failed`.
void write_results_csv(std::ostream& out, const ExperimentResult& result);
nlohmann::json to_json(const ExperimentResult& result);

}  // namespace deltaope

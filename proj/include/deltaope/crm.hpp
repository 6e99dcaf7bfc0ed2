#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "deltaope/dataset.hpp"
#include "deltaope/policy.hpp"

namespace deltaope {

// Which off-policy estimate the pessimistic bound is built on.
enum class ObjectiveKind {
  kPairwise,   // delta_beta_ips of target vs production
  kPointwise,  // beta_ips of the target alone
};

inline constexpr double kDefaultPessimism = 1.959964;

struct LearnOptions {
  std::vector<double> initial_mean;  // empty: start at the production mean
  double pessimism = kDefaultPessimism;
  double step_size = 1.0;
  std::size_t max_iterations = 100;
  double gradient_tolerance = 1e-6;
  ObjectiveKind objective = ObjectiveKind::kPairwise;
};

struct TraceRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double beta = 0.0;
};

struct LearnResult {
  GaussianPolicy policy;
  std::vector<TraceRow> trace;
  bool converged = false;
};

// Lower-bound objective for Gaussian target policies sharing the production
// variance, over a fixed continuous log. Propensities of the logging and
// production policies are cached once.
class CrmProblem {
 public:
  CrmProblem(const LoggedDataset& dataset, const GaussianPolicy& production, double pessimism,
             ObjectiveKind kind = ObjectiveKind::kPairwise);

  std::size_t dim() const noexcept { return production_.dim(); }
  std::size_t size() const noexcept { return rewards_.size(); }
  double pessimism() const noexcept { return pessimism_; }
  const GaussianPolicy& production() const noexcept { return production_; }

  // Plug-in baseline at `target_mean` (0 when its ratio is degenerate).
  double plugin_beta(std::span<const double> target_mean) const;

  // estimate - pessimism * sqrt(variance) with the plug-in baseline.
  double objective(std::span<const double> target_mean) const;
  // Same with the baseline held at `beta`.
  double objective_at_beta(std::span<const double> target_mean, double beta) const;
  // Analytic gradient of objective_at_beta with respect to the target mean.
  std::vector<double> gradient_at_beta(std::span<const double> target_mean, double beta) const;

 private:
  std::vector<double> target_weights(std::span<const double> target_mean) const;
  std::vector<double> terms(const std::vector<double>& target_weights, double beta) const;
  double beta_for(const std::vector<double>& target_weights) const;
  double bound(const std::vector<double>& target_weights, double beta) const;

  GaussianPolicy production_;
  double pessimism_;
  ObjectiveKind kind_;
  std::size_t dim_;
  std::vector<double> actions_;  // row-major n x dim
  std::vector<double> log_logging_;
  std::vector<double> production_weights_;
  std::vector<double> rewards_;
};

struct EstimateReport;

// report.estimate - lambda * sqrt(report.variance).
double pessimistic_bound(const EstimateReport& report, double lambda);

// delta_beta_ips(target, production).estimate - lambda * sqrt(variance).
double crm_objective(const LoggedDataset& dataset, const Policy& target,
                     const Policy& production, double lambda);

// Gradient of crm_objective in the target mean, with the baseline frozen at its
// plug-in value for `target_mean`.
std::vector<double> objective_gradient(const LoggedDataset& dataset,
                                       std::span<const double> target_mean,
                                       const Policy& production, double lambda);

// Full-batch gradient ascent with step halving. Accepted iterates never lower
// the objective. Throws NumericalFailureError on a non-finite objective or gradient.
LearnResult learn_policy(const LoggedDataset& dataset, const Policy& production,
                         const LearnOptions& options);

}  // namespace deltaope

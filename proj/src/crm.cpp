#include "deltaope/crm.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "deltaope/errors.hpp"
#include "deltaope/estimators.hpp"

namespace deltaope {

CrmProblem::CrmProblem(const LoggedDataset& dataset, const GaussianPolicy& production,
                       double pessimism, ObjectiveKind kind)
    : production_(production), pessimism_(pessimism), kind_(kind), dim_(production.dim()) {
  if (dataset.kind() != ActionKind::kContinuous) {
    throw std::invalid_argument("CRM learning needs a continuous-action log");
  }
  if (dataset.action_dim() != dim_) {
    throw std::invalid_argument(fmt::format("log has action dimension {}, production has {}",
                                            dataset.action_dim(), dim_));
  }
  if (!(pessimism_ >= 0.0) || !std::isfinite(pessimism_)) {
    throw std::invalid_argument("pessimism multiplier must be nonnegative");
  }
  const std::size_t n = dataset.size();
  actions_.reserve(n * dim_);
  log_logging_.resize(n);
  production_weights_.resize(n);
  rewards_.assign(dataset.rewards().begin(), dataset.rewards().end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = dataset.continuous_action(i);
    actions_.insert(actions_.end(), a.begin(), a.end());
    log_logging_[i] = std::log(dataset.logging_propensity(i));
    production_weights_[i] = std::exp(production_.log_density(a) - log_logging_[i]);
  }
}

std::vector<double> CrmProblem::target_weights(std::span<const double> target_mean) const {
  if (target_mean.size() != dim_) {
    throw std::invalid_argument("target mean has the wrong dimension");
  }
  const double variance = production_.variance();
  const double log_norm =
      -0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi * variance);
  std::vector<double> w(size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double* a = actions_.data() + i * dim_;
    double sq = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double diff = a[k] - target_mean[k];
      sq += diff * diff;
    }
    w[i] = std::exp(log_norm - 0.5 * sq / variance - log_logging_[i]);
  }
  return w;
}

namespace {

struct MeanVar {
  double mean = 0.0;
  double variance_of_mean = 0.0;
};

MeanVar term_moments(const std::vector<double>& terms) {
  const double nd = static_cast<double>(terms.size());
  double mean = 0.0;
  for (double t : terms) mean += t;
  mean /= nd;
  double ss = 0.0;
  for (double t : terms) ss += (t - mean) * (t - mean);
  return {mean, ss / (nd - 1.0) / nd};
}

}  // namespace

std::vector<double> CrmProblem::terms(const std::vector<double>& w, double beta) const {
  std::vector<double> t(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    t[i] = kind_ == ObjectiveKind::kPairwise
               ? (w[i] - production_weights_[i]) * (rewards_[i] - beta)
               : beta + w[i] * (rewards_[i] - beta);
  }
  return t;
}

double CrmProblem::beta_for(const std::vector<double>& w) const {
  try {
    if (kind_ == ObjectiveKind::kPairwise) {
      return optimal_beta_pairwise_from_weights(w, production_weights_, rewards_);
    }
    return pointwise_beta_from_weights(w, rewards_);
  } catch (const DegenerateBaselineError&) {
    return 0.0;
  }
}

double CrmProblem::bound(const std::vector<double>& w, double beta) const {
  const MeanVar m = term_moments(terms(w, beta));
  return m.mean - pessimism_ * std::sqrt(m.variance_of_mean);
}

double CrmProblem::plugin_beta(std::span<const double> target_mean) const {
  return beta_for(target_weights(target_mean));
}

double CrmProblem::objective(std::span<const double> target_mean) const {
  const auto w = target_weights(target_mean);
  return bound(w, beta_for(w));
}

double CrmProblem::objective_at_beta(std::span<const double> target_mean, double beta) const {
  return bound(target_weights(target_mean), beta);
}

std::vector<double> CrmProblem::gradient_at_beta(std::span<const double> target_mean,
                                                 double beta) const {
  const auto w = target_weights(target_mean);
  const std::size_t n = size();
  const double nd = static_cast<double>(n);
  const double variance = production_.variance();

  const std::vector<double> t = terms(w, beta);
  const MeanVar m = term_moments(t);

  // d term_i / d mu = w_i (a_i - mu) / sigma^2 (r_i - beta) for both objective kinds.
  std::vector<double> d_mean(dim_, 0.0);
  std::vector<double> d_var(dim_, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = actions_.data() + i * dim_;
    const double scale = w[i] * (rewards_[i] - beta) / variance;
    const double centred = t[i] - m.mean;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double dt = scale * (a[k] - target_mean[k]);
      d_mean[k] += dt;
      d_var[k] += centred * dt;
    }
  }
  std::vector<double> grad(dim_);
  const double sd = std::sqrt(m.variance_of_mean);
  for (std::size_t k = 0; k < dim_; ++k) {
    d_mean[k] /= nd;
    d_var[k] *= 2.0 / (nd * (nd - 1.0));
    // At zero variance the penalty is not differentiable; take the zero subgradient.
    grad[k] = sd > 0.0 ? d_mean[k] - pessimism_ * d_var[k] / (2.0 * sd) : d_mean[k];
  }
  return grad;
}

double pessimistic_bound(const EstimateReport& report, double lambda) {
  return report.estimate - lambda * std::sqrt(report.variance);
}

double crm_objective(const LoggedDataset& dataset, const Policy& target,
                     const Policy& production, double lambda) {
  return pessimistic_bound(delta_beta_ips(dataset, target, production), lambda);
}

std::vector<double> objective_gradient(const LoggedDataset& dataset,
                                       std::span<const double> target_mean,
                                       const Policy& production, double lambda) {
  const CrmProblem problem(dataset, production.gaussian(), lambda);
  return problem.gradient_at_beta(target_mean, problem.plugin_beta(target_mean));
}

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

constexpr int kMaxHalvings = 20;

}  // namespace

LearnResult learn_policy(const LoggedDataset& dataset, const Policy& production,
                         const LearnOptions& options) {
  const GaussianPolicy& prod = production.gaussian();
  if (!(options.step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (!(options.gradient_tolerance > 0.0)) {
    throw std::invalid_argument("gradient_tolerance must be positive");
  }
  std::vector<double> mean = options.initial_mean.empty() ? prod.mean() : options.initial_mean;
  if (mean.size() != prod.dim()) {
    throw std::invalid_argument(fmt::format("initial mean has dimension {}, expected {}",
                                            mean.size(), prod.dim()));
  }
  const CrmProblem problem(dataset, prod, options.pessimism, options.objective);

  LearnResult result{GaussianPolicy(mean, prod.variance()), {}, false};
  double beta = problem.plugin_beta(mean);
  double objective = problem.objective_at_beta(mean, beta);
  if (!std::isfinite(objective)) throw NumericalFailureError("non-finite objective", 0);

  for (std::size_t it = 0;; ++it) {
    const std::vector<double> grad = problem.gradient_at_beta(mean, beta);
    if (!all_finite(grad)) throw NumericalFailureError("non-finite gradient", it);
    const double grad_norm = norm(grad);
    result.trace.push_back({it, objective, grad_norm, beta});
    if (grad_norm < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    double step = options.step_size;
    bool accepted = false;
    std::vector<double> candidate(mean.size());
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      for (std::size_t k = 0; k < mean.size(); ++k) candidate[k] = mean[k] + step * grad[k];
      const double value = problem.objective(candidate);
      if (std::isfinite(value) && value >= objective) {
        objective = value;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    mean = candidate;
    beta = problem.plugin_beta(mean);
    if (!std::isfinite(objective)) throw NumericalFailureError("non-finite objective", it + 1);
  }
  result.policy = GaussianPolicy(mean, prod.variance());
  return result;
}

}  // namespace deltaope

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace deltaope {

using Rng = std::mt19937_64;

struct Context {
  std::size_t id = 0;
};

using DiscreteAction = std::size_t;
using ContinuousAction = std::vector<double>;
using Action = std::variant<DiscreteAction, ContinuousAction>;

enum class ActionKind { kDiscrete, kContinuous };

// Dense row-major matrix, rows indexed by context and columns by action.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// pi(a|x) = softmax(tau * score(x, .))(a) over a finite context set.
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(Matrix scores, double inverse_temperature);

  // Scores are log-probabilities with tau = 1; zero entries become -inf scores.
  static SoftmaxPolicy from_probabilities(const Matrix& probabilities);

  std::size_t n_contexts() const noexcept { return scores_.rows(); }
  std::size_t n_actions() const noexcept { return scores_.cols(); }
  double inverse_temperature() const noexcept { return inverse_temperature_; }
  const Matrix& scores() const noexcept { return scores_; }
  const Matrix& probabilities() const noexcept { return probabilities_; }

  double probability(std::size_t context, std::size_t action) const;
  DiscreteAction sample(std::size_t context, Rng& rng) const;

  bool operator==(const SoftmaxPolicy& other) const {
    return probabilities_ == other.probabilities_;
  }

 private:
  Matrix scores_;
  double inverse_temperature_;
  Matrix probabilities_;
  Matrix cumulative_;
};

// Isotropic Gaussian N(mean, variance * I).
class GaussianPolicy {
 public:
  GaussianPolicy(std::vector<double> mean, double variance);

  std::size_t dim() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }

  double density(std::span<const double> action) const;
  double log_density(std::span<const double> action) const;
  ContinuousAction sample(Rng& rng) const;
  // Writes one draw into `out` (size dim()) without allocating.
  void sample_into(Rng& rng, std::span<double> out) const;
  // Same, drawing from a caller-owned standard normal so its cached state carries over.
  void sample_into(Rng& rng, std::span<double> out,
                   std::normal_distribution<double>& standard_normal) const;

  bool operator==(const GaussianPolicy&) const = default;

 private:
  std::vector<double> mean_;
  double variance_;
  double log_normaliser_;
};

class Policy {
 public:
  Policy(SoftmaxPolicy p) : impl_(std::move(p)) {}  // NOLINT(google-explicit-constructor)
  Policy(GaussianPolicy p) : impl_(std::move(p)) {}  // NOLINT(google-explicit-constructor)

  ActionKind kind() const noexcept {
    return std::holds_alternative<SoftmaxPolicy>(impl_) ? ActionKind::kDiscrete
                                                        : ActionKind::kContinuous;
  }
  const SoftmaxPolicy& softmax() const;
  const GaussianPolicy& gaussian() const;

  bool operator==(const Policy&) const = default;

 private:
  std::variant<SoftmaxPolicy, GaussianPolicy> impl_;
};

// Known mean reward q(x, a) for a discrete environment.
struct MeanRewardTable {
  Matrix q;
};

// E[r | a] = mean of the action vector's coordinates.
struct MeanOfActionReward {
  std::size_t dim = 0;
};

using RewardModel = std::variant<MeanRewardTable, MeanOfActionReward>;

// pmf (discrete) or pdf (continuous) of `action` under `policy` at `context`.
// Throws std::invalid_argument on a discrete/continuous mismatch and
// std::out_of_range on an invalid context or action index.
double propensity(const Policy& policy, const Context& context, const Action& action);

Action sample_action(const Policy& policy, const Context& context, Rng& rng);

// Exact V(pi) under a known reward model with contexts drawn uniformly.
double true_value(const Policy& policy, const RewardModel& model);

}  // namespace deltaope

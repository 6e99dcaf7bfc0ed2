#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>

#include "json.hpp"

#include "deltaope/dataset.hpp"
#include "deltaope/policy.hpp"

namespace deltaope {

enum class EnvironmentKind { kDiscrete, kContinuous };

// Flat environment description shared by both kinds; fields that do not apply
// to a kind are ignored by it.
struct EnvironmentConfig {
  EnvironmentKind kind = EnvironmentKind::kDiscrete;
  std::size_t n_actions = 10;
  std::size_t n_contexts = 20;
  double tau = 1.0;
  double tau_target = 8.0;
  double tau_production = 4.0;
  double perturbation_scale = 0.1;
  double reward_noise_variance = 0.25;
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
EnvironmentConfig environment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvironmentConfig& config);
void validate(const EnvironmentConfig& config);

class DiscreteEnvironment {
 public:
  DiscreteEnvironment(Matrix mean_rewards, SoftmaxPolicy logging, SoftmaxPolicy target,
                      SoftmaxPolicy production);

  std::size_t n_contexts() const noexcept { return mean_rewards_.rows(); }
  std::size_t n_actions() const noexcept { return mean_rewards_.cols(); }
  const Matrix& mean_rewards() const noexcept { return mean_rewards_; }
  const Policy& logging() const noexcept { return logging_; }
  const Policy& target() const noexcept { return target_; }
  const Policy& production() const noexcept { return production_; }
  RewardModel reward_model() const { return MeanRewardTable{mean_rewards_}; }
  double true_delta() const noexcept { return true_delta_; }

 private:
  Matrix mean_rewards_;
  Policy logging_;
  Policy target_;
  Policy production_;
  double true_delta_;
};

class ContinuousEnvironment {
 public:
  static constexpr std::size_t kDim = 5;
  static constexpr double kPolicyVariance = 0.5;
  static constexpr double kLoggingMean = 0.475;
  static constexpr double kProductionMean = 0.5;
  static constexpr double kTargetMean = 0.505;

  explicit ContinuousEnvironment(double reward_noise_variance = 0.25);
  ContinuousEnvironment(GaussianPolicy logging, GaussianPolicy target, GaussianPolicy production,
                        double reward_noise_variance);

  std::size_t dim() const noexcept { return logging_.gaussian().dim(); }
  const Policy& logging() const noexcept { return logging_; }
  const Policy& target() const noexcept { return target_; }
  const Policy& production() const noexcept { return production_; }
  double reward_noise_variance() const noexcept { return reward_noise_variance_; }
  RewardModel reward_model() const { return MeanOfActionReward{dim()}; }
  double true_delta() const noexcept { return true_delta_; }

 private:
  Policy logging_;
  Policy target_;
  Policy production_;
  double reward_noise_variance_;
  double true_delta_;
};

class Environment {
 public:
  Environment(DiscreteEnvironment env) : impl_(std::move(env)) {}    // NOLINT
  Environment(ContinuousEnvironment env) : impl_(std::move(env)) {}  // NOLINT

  EnvironmentKind kind() const noexcept {
    return std::holds_alternative<DiscreteEnvironment>(impl_) ? EnvironmentKind::kDiscrete
                                                              : EnvironmentKind::kContinuous;
  }
  const DiscreteEnvironment& discrete() const { return std::get<DiscreteEnvironment>(impl_); }
  const ContinuousEnvironment& continuous() const {
    return std::get<ContinuousEnvironment>(impl_);
  }

  const Policy& logging() const;
  const Policy& target() const;
  const Policy& production() const;
  RewardModel reward_model() const;
  double true_delta() const;

 private:
  std::variant<DiscreteEnvironment, ContinuousEnvironment> impl_;
};

// Mean rewards q ~ U[0,1]; logging = softmax(tau q); target and production are
// softmax(tau_t (q + e_t)) and softmax(tau_p (q + e_p)) with e ~ N(0, rho^2).
DiscreteEnvironment build_discrete_env(const EnvironmentConfig& config, std::uint64_t seed);
ContinuousEnvironment build_continuous_env(double reward_noise_variance = 0.25);
Environment build_environment(const EnvironmentConfig& config, std::uint64_t seed);

// n i.i.d. samples from the logging policy. Deterministic in (env, n, seed), and
// simulate_log(env, n, s) is the length-n prefix of simulate_log(env, m, s) for m >= n.
LoggedDataset simulate_log(const Environment& env, std::size_t n, std::uint64_t seed);

double true_value(const Policy& policy, const Environment& env);

// Seeds a generator from (seed, stream) so distinct uses of one seed do not share a stream.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace deltaope

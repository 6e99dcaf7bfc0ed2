#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "deltaope/errors.hpp"
#include "deltaope/estimators.hpp"
#include "deltaope/simulators.hpp"

namespace deltaope {
namespace {

std::string serialise(const LoggedDataset& d) {
  std::ostringstream s;
  write_csv(s, d);
  return s.str();
}

double enumerate_value(const SoftmaxPolicy& p, const Matrix& q) {
  // Exact expectation by walking every (context, action) cell in reverse order.
  double total = 0.0;
  for (std::size_t x = q.rows(); x-- > 0;) {
    double row = 0.0;
    for (std::size_t a = q.cols(); a-- > 0;) row += p.probability(x, a) * q(x, a);
    total += row;
  }
  return total / static_cast<double>(q.rows());
}

TEST(ContinuousEnv, GroundTruthConstants) {
  const Environment env = build_continuous_env();
  EXPECT_EQ(true_value(env.logging(), env), 0.475);
  EXPECT_EQ(true_value(env.production(), env), 0.5);
  EXPECT_EQ(true_value(env.target(), env), 0.505);
  EXPECT_NEAR(env.true_delta(), 0.005, 1e-15);
  EXPECT_EQ(env.true_delta(), true_value(env.target(), env) - true_value(env.production(), env));
  EXPECT_EQ(env.continuous().dim(), 5u);
  EXPECT_EQ(env.target().gaussian().variance(), 0.5);
}

TEST(ContinuousEnv, LoggedRewardMean) {
  const Environment env = build_continuous_env();
  const LoggedDataset d = simulate_log(env, 100000, 17);
  double s = 0.0;
  for (double r : d.rewards()) s += r;
  EXPECT_NEAR(s / 100000.0, 0.475, 0.01);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_GT(d.logging_propensity(i), 0.0);
    EXPECT_EQ(d.logging_propensity(i), env.logging().gaussian().density(d.continuous_action(i)));
  }
}

TEST(DiscreteEnv, ClosedFormMatchesEnumeration) {
  EnvironmentConfig config;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    config.n_actions = 5 + 5 * (seed % 3);
    const auto env = build_discrete_env(config, seed);
    for (const Policy* p : {&env.logging(), &env.target(), &env.production()}) {
      EXPECT_NEAR(true_value(*p, env.reward_model()), enumerate_value(p->softmax(), env.mean_rewards()),
                  1e-12);
    }
    EXPECT_EQ(env.true_delta(), true_value(env.target(), Environment(env)) -
                                    true_value(env.production(), Environment(env)));
  }
}

TEST(DiscreteEnv, IdenticalConstructionGivesZeroDelta) {
  EnvironmentConfig config;
  config.perturbation_scale = 0.0;
  config.tau_target = config.tau_production = 3.0;
  const auto env = build_discrete_env(config, 5);
  EXPECT_EQ(env.target(), env.production());
  EXPECT_EQ(env.true_delta(), 0.0);
}

TEST(DiscreteEnv, LargeTemperatureApproachesArgmax) {
  EnvironmentConfig config;
  config.perturbation_scale = 0.0;
  config.tau_target = 1e4;
  const auto env = build_discrete_env(config, 8);
  const Matrix& q = env.mean_rewards();
  double best = 0.0;
  for (std::size_t x = 0; x < q.rows(); ++x) {
    const auto row = q.row(x);
    best += *std::max_element(row.begin(), row.end());
  }
  best /= static_cast<double>(q.rows());
  EXPECT_NEAR(true_value(env.target(), env.reward_model()), best, 1e-6);
}

TEST(DiscreteEnv, Deterministic) {
  EnvironmentConfig config;
  const auto a = build_discrete_env(config, 42);
  const auto b = build_discrete_env(config, 42);
  EXPECT_EQ(a.mean_rewards(), b.mean_rewards());
  EXPECT_EQ(a.target(), b.target());
  EXPECT_EQ(a.production(), b.production());
  EXPECT_NE(a.mean_rewards(), build_discrete_env(config, 43).mean_rewards());
  for (std::size_t x = 0; x < a.n_contexts(); ++x) {
    for (std::size_t k = 0; k < a.n_actions(); ++k) {
      EXPECT_GE(a.mean_rewards()(x, k), 0.0);
      EXPECT_LE(a.mean_rewards()(x, k), 1.0);
    }
  }
}

TEST(SimulateLog, DeterministicBytes) {
  const Environment d = build_environment(EnvironmentConfig{}, 1);
  EXPECT_EQ(serialise(simulate_log(d, 500, 9)), serialise(simulate_log(d, 500, 9)));
  EXPECT_NE(serialise(simulate_log(d, 500, 9)), serialise(simulate_log(d, 500, 10)));
  const Environment c = build_continuous_env();
  EXPECT_EQ(serialise(simulate_log(c, 500, 9)), serialise(simulate_log(c, 500, 9)));
}

TEST(SimulateLog, PrefixProperty) {
  for (const Environment& env : {build_environment(EnvironmentConfig{}, 2), Environment(build_continuous_env())}) {
    const LoggedDataset big = simulate_log(env, 1000, 4);
    EXPECT_EQ(simulate_log(env, 37, 4), big.prefix(37));
  }
}

TEST(SimulateLog, DiscreteRewardsAndPropensities) {
  Matrix q(3, 4);
  for (std::size_t x = 0; x < 3; ++x) {
    for (std::size_t a = 0; a < 4; ++a) q(x, a) = (x + a) % 2;
  }
  const SoftmaxPolicy logging(q, 1.0);
  const Environment env = DiscreteEnvironment(q, logging, SoftmaxPolicy(q, 2.0), logging);
  const LoggedDataset d = simulate_log(env, 2000, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.reward(i), q(d.context_id(i), d.discrete_action(i)));
    EXPECT_EQ(d.logging_propensity(i), logging.probability(d.context_id(i), d.discrete_action(i)));
  }
  EXPECT_THROW(simulate_log(env, 1, 1), InsufficientDataError);
}

TEST(SimulateLog, IpsConsistentWithTruth) {
  for (const Environment& env : {build_environment(EnvironmentConfig{}, 6), Environment(build_continuous_env())}) {
    const double truth = true_value(env.target(), env);
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto r = ips(simulate_log(env, 10000, seed), env.target());
      covered += std::abs(r.estimate - truth) < 5.0 * std::sqrt(r.variance);
    }
    EXPECT_GE(covered, 990);
  }
}

TEST(EnvironmentConfig, Json) {
  const auto c = environment_config_from_json(
      nlohmann::json{{"kind", "continuous"}, {"reward_noise_variance", 0.1}});
  EXPECT_EQ(c.kind, EnvironmentKind::kContinuous);
  EXPECT_EQ(c.reward_noise_variance, 0.1);
  EXPECT_EQ(environment_config_from_json(to_json(c)).reward_noise_variance, 0.1);
  EXPECT_THROW(environment_config_from_json(nlohmann::json{{"kind", "ranking"}}), ConfigError);
  EXPECT_THROW(environment_config_from_json(nlohmann::json{{"n_actions", 1}}), ConfigError);
  EXPECT_THROW(environment_config_from_json(nlohmann::json{{"tau", -1.0}}), ConfigError);
  EXPECT_THROW(environment_config_from_json(nlohmann::json{{"colour", 1}}), ConfigError);
  EXPECT_THROW(environment_config_from_json(nlohmann::json{{"tau", "hot"}}), ConfigError);
}

}  // namespace
}  // namespace deltaope

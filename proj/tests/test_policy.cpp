#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "deltaope/policy.hpp"

namespace deltaope {
namespace {

Policy two_action(double p0) {
  return SoftmaxPolicy::from_probabilities(Matrix(1, 2, {p0, 1.0 - p0}));
}

TEST(Propensity, EqualScoresGiveUniform) {
  const Policy p = SoftmaxPolicy(Matrix(1, 4, 3.7), 2.0);
  for (std::size_t a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(propensity(p, {0}, a), 0.25);
}

TEST(Propensity, GaussianDensityAtMean) {
  const Policy p = GaussianPolicy(std::vector<double>(5, 0.3), 0.5);
  const double expected = std::pow(std::numbers::pi, -2.5);
  EXPECT_NEAR(propensity(p, {0}, ContinuousAction(5, 0.3)), expected, 1e-15);
  EXPECT_NEAR(expected, 0.05717, 1e-5);
}

TEST(Propensity, SoftmaxArithmetic) {
  const Policy p = SoftmaxPolicy(Matrix(1, 2, {1.0, 0.0}), 1.0);
  const double e = std::numbers::e;
  EXPECT_NEAR(propensity(p, {0}, DiscreteAction{0}), e / (e + 1.0), 1e-15);
  EXPECT_NEAR(propensity(p, {0}, DiscreteAction{1}), 1.0 / (e + 1.0), 1e-15);
}

TEST(Propensity, GaussianMatchesLogDensity) {
  const GaussianPolicy g({0.1, -0.4, 2.0}, 0.7);
  const std::vector<double> a = {0.5, 0.5, 0.5};
  double sq = 0.0;
  for (std::size_t k = 0; k < 3; ++k) sq += (a[k] - g.mean()[k]) * (a[k] - g.mean()[k]);
  const double oracle = std::pow(2.0 * std::numbers::pi * 0.7, -1.5) * std::exp(-sq / 1.4);
  EXPECT_NEAR(g.density(a), oracle, 1e-15);
  EXPECT_NEAR(g.log_density(a), std::log(oracle), 1e-13);
}

TEST(Propensity, Errors) {
  const Policy d = SoftmaxPolicy(Matrix(2, 3, 0.0), 1.0);
  const Policy g = GaussianPolicy({0.0, 0.0}, 1.0);
  EXPECT_THROW(propensity(d, {0}, ContinuousAction{0.0}), std::invalid_argument);
  EXPECT_THROW(propensity(g, {0}, DiscreteAction{0}), std::invalid_argument);
  EXPECT_THROW(propensity(d, {0}, DiscreteAction{3}), std::out_of_range);
  EXPECT_THROW(propensity(d, {2}, DiscreteAction{0}), std::out_of_range);
  EXPECT_THROW(propensity(g, {0}, ContinuousAction{0.0}), std::invalid_argument);
}

TEST(PolicyConstruction, RejectsInvalidParameters) {
  EXPECT_THROW(SoftmaxPolicy(Matrix(1, 2, 0.0), 0.0), std::invalid_argument);
  EXPECT_THROW(SoftmaxPolicy(Matrix(1, 2, 0.0), -1.0), std::invalid_argument);
  EXPECT_THROW(GaussianPolicy({0.0}, 0.0), std::invalid_argument);
  EXPECT_THROW(GaussianPolicy({}, 1.0), std::invalid_argument);
  EXPECT_THROW(Policy(GaussianPolicy({0.0}, 1.0)).softmax(), std::invalid_argument);
}

TEST(PolicyProperty, RowsSumToOne) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> score(0.0, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix m(6, 11);
    for (std::size_t x = 0; x < 6; ++x) {
      for (std::size_t a = 0; a < 11; ++a) m(x, a) = score(rng);
    }
    const Policy p = SoftmaxPolicy(m, 0.5 + rep);
    for (std::size_t x = 0; x < 6; ++x) {
      double s = 0.0;
      for (std::size_t a = 0; a < 11; ++a) {
        const double v = propensity(p, {x}, DiscreteAction{a});
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(SampleAction, DegenerateAlwaysReturnsSupport) {
  const Policy p = SoftmaxPolicy::from_probabilities(Matrix(1, 5, {0, 0, 0, 1, 0}));
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(std::get<DiscreteAction>(sample_action(p, {0}, rng)), 3u);
}

TEST(SampleAction, ChiSquareGoodnessOfFit) {
  const std::vector<double> probs = {0.05, 0.15, 0.2, 0.25, 0.35};
  const Policy p = SoftmaxPolicy::from_probabilities(Matrix(1, 5, probs));
  Rng rng(20240101);
  const int n = 100000;
  std::vector<double> counts(5, 0.0);
  for (int i = 0; i < n; ++i) counts[std::get<DiscreteAction>(sample_action(p, {0}, rng))] += 1.0;
  double stat = 0.0;
  for (std::size_t a = 0; a < 5; ++a) {
    const double expected = n * probs[a];
    stat += (counts[a] - expected) * (counts[a] - expected) / expected;
  }
  const double critical = boost::math::quantile(boost::math::chi_squared(4.0), 0.99);
  EXPECT_LT(stat, critical);
}

TEST(SampleAction, GaussianLawOfLargeNumbers) {
  const Policy p = GaussianPolicy(std::vector<double>(5, 0.0), 0.5);
  Rng rng(11);
  std::vector<double> sum(5, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto a = std::get<ContinuousAction>(sample_action(p, {0}, rng));
    for (std::size_t k = 0; k < 5; ++k) sum[k] += a[k];
  }
  for (double s : sum) EXPECT_LT(std::abs(s / n), 0.02);
}

TEST(SampleAction, DeterministicGivenState) {
  const Policy g = GaussianPolicy({1.0, 2.0}, 0.3);
  const Policy d = SoftmaxPolicy(Matrix(3, 4, {0, 1, 2, 3, 3, 2, 1, 0, 1, 1, 1, 1}), 1.0);
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_action(g, {0}, a), sample_action(g, {0}, b));
    EXPECT_EQ(sample_action(d, {static_cast<std::size_t>(i % 3)}, a),
              sample_action(d, {static_cast<std::size_t>(i % 3)}, b));
  }
}

TEST(TrueValue, Examples) {
  const Policy g = GaussianPolicy(std::vector<double>(5, 0.505), 0.5);
  EXPECT_NEAR(true_value(g, MeanOfActionReward{5}), 0.505, 1e-15);

  const Policy uniform = SoftmaxPolicy(Matrix(3, 4, 0.0), 1.0);
  EXPECT_NEAR(true_value(uniform, MeanRewardTable{Matrix(3, 4, 0.42)}), 0.42, 1e-15);

  EXPECT_NEAR(true_value(two_action(0.25), MeanRewardTable{Matrix(1, 2, {0.8, 0.2})}), 0.35,
              1e-15);
}

TEST(TrueValue, VariantMismatch) {
  const Policy g = GaussianPolicy({0.0}, 1.0);
  EXPECT_THROW(true_value(g, MeanRewardTable{Matrix(1, 2, 0.5)}), std::invalid_argument);
  EXPECT_THROW(true_value(two_action(0.5), MeanOfActionReward{1}), std::invalid_argument);
  EXPECT_THROW(true_value(two_action(0.5), MeanRewardTable{Matrix(2, 2, 0.5)}),
               std::invalid_argument);
}

}  // namespace
}  // namespace deltaope

#include "deltaope/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace deltaope {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: value count does not match shape");
  }
}

SoftmaxPolicy::SoftmaxPolicy(Matrix scores, double inverse_temperature)
    : scores_(std::move(scores)), inverse_temperature_(inverse_temperature) {
  if (!(inverse_temperature_ > 0.0) || !std::isfinite(inverse_temperature_)) {
    throw std::invalid_argument("SoftmaxPolicy: inverse temperature must be positive");
  }
  if (scores_.rows() == 0 || scores_.cols() == 0) {
    throw std::invalid_argument("SoftmaxPolicy: empty score matrix");
  }
  const std::size_t n_x = scores_.rows();
  const std::size_t n_a = scores_.cols();
  probabilities_ = Matrix(n_x, n_a);
  cumulative_ = Matrix(n_x, n_a);
  for (std::size_t x = 0; x < n_x; ++x) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (double s : scores_.row(x)) {
      if (std::isnan(s) || s == std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("SoftmaxPolicy: scores must be finite or -inf");
      }
      max_score = std::max(max_score, s);
    }
    if (!std::isfinite(max_score)) {
      throw std::invalid_argument("SoftmaxPolicy: context " + std::to_string(x) +
                                  " has no finite score");
    }
    double total = 0.0;
    for (std::size_t a = 0; a < n_a; ++a) {
      const double e = std::exp(inverse_temperature_ * (scores_(x, a) - max_score));
      probabilities_(x, a) = e;
      total += e;
    }
    double running = 0.0;
    for (std::size_t a = 0; a < n_a; ++a) {
      probabilities_(x, a) /= total;
      running += probabilities_(x, a);
      cumulative_(x, a) = running;
    }
  }
}

SoftmaxPolicy SoftmaxPolicy::from_probabilities(const Matrix& probabilities) {
  Matrix scores(probabilities.rows(), probabilities.cols());
  for (std::size_t x = 0; x < probabilities.rows(); ++x) {
    for (std::size_t a = 0; a < probabilities.cols(); ++a) {
      const double p = probabilities(x, a);
      if (p < 0.0 || !std::isfinite(p)) {
        throw std::invalid_argument("SoftmaxPolicy: probabilities must be nonnegative");
      }
      scores(x, a) = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
  }
  return SoftmaxPolicy(std::move(scores), 1.0);
}

double SoftmaxPolicy::probability(std::size_t context, std::size_t action) const {
  if (context >= n_contexts()) {
    throw std::out_of_range("context id " + std::to_string(context) + " out of range");
  }
  if (action >= n_actions()) {
    throw std::out_of_range("action index " + std::to_string(action) + " out of range");
  }
  return probabilities_(context, action);
}

DiscreteAction SoftmaxPolicy::sample(std::size_t context, Rng& rng) const {
  if (context >= n_contexts()) {
    throw std::out_of_range("context id " + std::to_string(context) + " out of range");
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto cum = cumulative_.row(context);
  for (std::size_t a = 0; a < cum.size(); ++a) {
    if (u < cum[a]) return a;
  }
  // Rounding left the last cumulative value below u: take the last supported action.
  for (std::size_t a = cum.size(); a-- > 0;) {
    if (probabilities_(context, a) > 0.0) return a;
  }
  return cum.size() - 1;
}

GaussianPolicy::GaussianPolicy(std::vector<double> mean, double variance)
    : mean_(std::move(mean)), variance_(variance) {
  if (mean_.empty()) throw std::invalid_argument("GaussianPolicy: empty mean");
  if (!(variance_ > 0.0) || !std::isfinite(variance_)) {
    throw std::invalid_argument("GaussianPolicy: variance must be positive");
  }
  for (double m : mean_) {
    if (!std::isfinite(m)) throw std::invalid_argument("GaussianPolicy: non-finite mean");
  }
  log_normaliser_ =
      -0.5 * static_cast<double>(mean_.size()) * std::log(2.0 * std::numbers::pi * variance_);
}

double GaussianPolicy::log_density(std::span<const double> action) const {
  if (action.size() != mean_.size()) {
    throw std::invalid_argument("GaussianPolicy: action dimension mismatch");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    const double diff = action[i] - mean_[i];
    sq += diff * diff;
  }
  return log_normaliser_ - 0.5 * sq / variance_;
}

double GaussianPolicy::density(std::span<const double> action) const {
  return std::exp(log_density(action));
}

void GaussianPolicy::sample_into(Rng& rng, std::span<double> out,
                                 std::normal_distribution<double>& standard_normal) const {
  if (out.size() != mean_.size()) {
    throw std::invalid_argument("GaussianPolicy: output dimension mismatch");
  }
  const double sd = std::sqrt(variance_);
  for (std::size_t i = 0; i < mean_.size(); ++i) out[i] = mean_[i] + sd * standard_normal(rng);
}

void GaussianPolicy::sample_into(Rng& rng, std::span<double> out) const {
  std::normal_distribution<double> standard_normal(0.0, 1.0);
  sample_into(rng, out, standard_normal);
}

ContinuousAction GaussianPolicy::sample(Rng& rng) const {
  ContinuousAction a(mean_.size());
  sample_into(rng, a);
  return a;
}

const SoftmaxPolicy& Policy::softmax() const {
  if (const auto* p = std::get_if<SoftmaxPolicy>(&impl_)) return *p;
  throw std::invalid_argument("policy is not a discrete softmax policy");
}

const GaussianPolicy& Policy::gaussian() const {
  if (const auto* p = std::get_if<GaussianPolicy>(&impl_)) return *p;
  throw std::invalid_argument("policy is not a Gaussian policy");
}

double propensity(const Policy& policy, const Context& context, const Action& action) {
  if (policy.kind() == ActionKind::kDiscrete) {
    const auto* a = std::get_if<DiscreteAction>(&action);
    if (a == nullptr) throw std::invalid_argument("continuous action given to a discrete policy");
    return policy.softmax().probability(context.id, *a);
  }
  const auto* a = std::get_if<ContinuousAction>(&action);
  if (a == nullptr) throw std::invalid_argument("discrete action given to a Gaussian policy");
  return policy.gaussian().density(*a);
}

Action sample_action(const Policy& policy, const Context& context, Rng& rng) {
  if (policy.kind() == ActionKind::kDiscrete) return policy.softmax().sample(context.id, rng);
  return policy.gaussian().sample(rng);
}

double true_value(const Policy& policy, const RewardModel& model) {
  if (const auto* table = std::get_if<MeanRewardTable>(&model)) {
    const SoftmaxPolicy& pi = policy.softmax();
    const Matrix& q = table->q;
    if (q.rows() != pi.n_contexts() || q.cols() != pi.n_actions()) {
      throw std::invalid_argument("true_value: reward table shape does not match policy");
    }
    double total = 0.0;
    for (std::size_t x = 0; x < q.rows(); ++x) {
      double per_context = 0.0;
      for (std::size_t a = 0; a < q.cols(); ++a) per_context += pi.probabilities()(x, a) * q(x, a);
      total += per_context;
    }
    return total / static_cast<double>(q.rows());
  }
  const auto& mean_reward = std::get<MeanOfActionReward>(model);
  const GaussianPolicy& pi = policy.gaussian();
  if (pi.dim() != mean_reward.dim) {
    throw std::invalid_argument("true_value: action dimension does not match reward model");
  }
  double total = 0.0;
  for (double m : pi.mean()) total += m;
  return total / static_cast<double>(pi.dim());
}

}  // namespace deltaope

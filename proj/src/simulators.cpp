#include "deltaope/simulators.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "deltaope/errors.hpp"

namespace deltaope {

namespace {

constexpr std::uint64_t kEnvironmentStream = 0x656e76;  // "env"
constexpr std::uint64_t kLogStream = 0x6c6f67;          // "log"

const std::set<std::string>& environment_keys() {
  static const std::set<std::string> keys = {
      "kind",           "n_actions",          "n_contexts",           "tau", "tau_target",
      "tau_production", "perturbation_scale", "reward_noise_variance"};
  return keys;
}

template <typename T>
T read_number(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(fmt::format("'{}' must be a nonnegative integer", key));
    }
  } else {
    if (!v.is_number()) throw ConfigError(fmt::format("'{}' must be a number", key));
  }
  return v.get<T>();
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

void validate(const EnvironmentConfig& c) {
  if (c.kind == EnvironmentKind::kDiscrete) {
    if (c.n_actions < 2) throw ConfigError("n_actions must be at least 2");
    if (c.n_contexts < 1) throw ConfigError("n_contexts must be at least 1");
    for (double tau : {c.tau, c.tau_target, c.tau_production}) {
      if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ConfigError("inverse temperatures must be positive and finite");
      }
    }
    if (!(c.perturbation_scale >= 0.0) || !std::isfinite(c.perturbation_scale)) {
      throw ConfigError("perturbation_scale must be nonnegative");
    }
  }
  if (!(c.reward_noise_variance >= 0.0) || !std::isfinite(c.reward_noise_variance)) {
    throw ConfigError("reward_noise_variance must be nonnegative");
  }
}

EnvironmentConfig environment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("environment config must be a JSON object");
  for (const auto& item : j.items()) {
    if (!environment_keys().contains(item.key())) {
      throw ConfigError("unknown environment key '" + item.key() + "'");
    }
  }
  EnvironmentConfig c;
  if (j.contains("kind")) {
    const auto& kind = j.at("kind");
    if (kind == "discrete") {
      c.kind = EnvironmentKind::kDiscrete;
    } else if (kind == "continuous") {
      c.kind = EnvironmentKind::kContinuous;
    } else {
      throw ConfigError("'kind' must be \"discrete\" or \"continuous\"");
    }
  }
  c.n_actions = read_number<std::size_t>(j, "n_actions", c.n_actions);
  c.n_contexts = read_number<std::size_t>(j, "n_contexts", c.n_contexts);
  c.tau = read_number<double>(j, "tau", c.tau);
  c.tau_target = read_number<double>(j, "tau_target", c.tau_target);
  c.tau_production = read_number<double>(j, "tau_production", c.tau_production);
  c.perturbation_scale = read_number<double>(j, "perturbation_scale", c.perturbation_scale);
  c.reward_noise_variance =
      read_number<double>(j, "reward_noise_variance", c.reward_noise_variance);
  validate(c);
  return c;
}

nlohmann::json to_json(const EnvironmentConfig& c) {
  return nlohmann::json{
      {"kind", c.kind == EnvironmentKind::kDiscrete ? "discrete" : "continuous"},
      {"n_actions", c.n_actions},
      {"n_contexts", c.n_contexts},
      {"tau", c.tau},
      {"tau_target", c.tau_target},
      {"tau_production", c.tau_production},
      {"perturbation_scale", c.perturbation_scale},
      {"reward_noise_variance", c.reward_noise_variance}};
}

DiscreteEnvironment::DiscreteEnvironment(Matrix mean_rewards, SoftmaxPolicy logging,
                                         SoftmaxPolicy target, SoftmaxPolicy production)
    : mean_rewards_(std::move(mean_rewards)),
      logging_(std::move(logging)),
      target_(std::move(target)),
      production_(std::move(production)) {
  for (double q : mean_rewards_.values()) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("mean rewards must lie in [0, 1]");
  }
  for (const Policy* p : {&logging_, &target_, &production_}) {
    const auto& s = p->softmax();
    if (s.n_contexts() != n_contexts() || s.n_actions() != n_actions()) {
      throw std::invalid_argument("policy shape does not match the reward table");
    }
  }
  for (double p : logging_.softmax().probabilities().values()) {
    if (!(p > 0.0)) throw std::invalid_argument("logging policy must have full support");
  }
  const RewardModel model = reward_model();
  true_delta_ = true_value(target_, model) - true_value(production_, model);
}

ContinuousEnvironment::ContinuousEnvironment(double reward_noise_variance)
    : ContinuousEnvironment(
          GaussianPolicy(std::vector<double>(kDim, kLoggingMean), kPolicyVariance),
          GaussianPolicy(std::vector<double>(kDim, kTargetMean), kPolicyVariance),
          GaussianPolicy(std::vector<double>(kDim, kProductionMean), kPolicyVariance),
          reward_noise_variance) {}

ContinuousEnvironment::ContinuousEnvironment(GaussianPolicy logging, GaussianPolicy target,
                                             GaussianPolicy production,
                                             double reward_noise_variance)
    : logging_(std::move(logging)),
      target_(std::move(target)),
      production_(std::move(production)),
      reward_noise_variance_(reward_noise_variance) {
  if (!(reward_noise_variance_ >= 0.0)) {
    throw std::invalid_argument("reward noise variance must be nonnegative");
  }
  const std::size_t d = logging_.gaussian().dim();
  if (target_.gaussian().dim() != d || production_.gaussian().dim() != d) {
    throw std::invalid_argument("policies must share one action dimension");
  }
  const RewardModel model = reward_model();
  true_delta_ = true_value(target_, model) - true_value(production_, model);
}

const Policy& Environment::logging() const {
  return std::visit([](const auto& e) -> const Policy& { return e.logging(); }, impl_);
}
const Policy& Environment::target() const {
  return std::visit([](const auto& e) -> const Policy& { return e.target(); }, impl_);
}
const Policy& Environment::production() const {
  return std::visit([](const auto& e) -> const Policy& { return e.production(); }, impl_);
}
RewardModel Environment::reward_model() const {
  return std::visit([](const auto& e) { return e.reward_model(); }, impl_);
}
double Environment::true_delta() const {
  return std::visit([](const auto& e) { return e.true_delta(); }, impl_);
}

DiscreteEnvironment build_discrete_env(const EnvironmentConfig& config, std::uint64_t seed) {
  EnvironmentConfig c = config;
  c.kind = EnvironmentKind::kDiscrete;
  validate(c);
  Rng rng = make_rng(seed, kEnvironmentStream);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n_x = c.n_contexts;
  const std::size_t n_a = c.n_actions;
  Matrix q(n_x, n_a);
  for (std::size_t x = 0; x < n_x; ++x) {
    for (std::size_t a = 0; a < n_a; ++a) q(x, a) = uniform(rng);
  }
  Matrix target_scores = q;
  Matrix production_scores = q;
  // Both perturbations are always drawn so that rho only rescales them.
  for (std::size_t x = 0; x < n_x; ++x) {
    for (std::size_t a = 0; a < n_a; ++a) {
      target_scores(x, a) += c.perturbation_scale * noise(rng);
      production_scores(x, a) += c.perturbation_scale * noise(rng);
    }
  }
  SoftmaxPolicy logging(q, c.tau);
  SoftmaxPolicy target(std::move(target_scores), c.tau_target);
  SoftmaxPolicy production(std::move(production_scores), c.tau_production);
  return DiscreteEnvironment(std::move(q), std::move(logging), std::move(target),
                             std::move(production));
}

ContinuousEnvironment build_continuous_env(double reward_noise_variance) {
  return ContinuousEnvironment(reward_noise_variance);
}

Environment build_environment(const EnvironmentConfig& config, std::uint64_t seed) {
  validate(config);
  if (config.kind == EnvironmentKind::kDiscrete) return build_discrete_env(config, seed);
  return build_continuous_env(config.reward_noise_variance);
}

LoggedDataset simulate_log(const Environment& env, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw InsufficientDataError(fmt::format("simulate_log needs n >= 2, got {}", n));
  Rng rng = make_rng(seed, kLogStream);
  if (env.kind() == EnvironmentKind::kDiscrete) {
    const DiscreteEnvironment& e = env.discrete();
    const SoftmaxPolicy& logging = e.logging().softmax();
    std::uniform_int_distribution<std::size_t> context(0, e.n_contexts() - 1);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    LoggedDataset::Builder b(ActionKind::kDiscrete);
    b.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t x = context(rng);
      const DiscreteAction a = logging.sample(x, rng);
      const double r = uniform(rng) < e.mean_rewards()(x, a) ? 1.0 : 0.0;
      b.add_discrete(x, a, logging.probability(x, a), r);
    }
    return std::move(b).build();
  }
  const ContinuousEnvironment& e = env.continuous();
  const GaussianPolicy& logging = e.logging().gaussian();
  const std::size_t d = logging.dim();
  const double noise_sd = std::sqrt(e.reward_noise_variance());
  std::normal_distribution<double> standard(0.0, 1.0);
  LoggedDataset::Builder b(ActionKind::kContinuous, d);
  b.reserve(n);
  std::vector<double> a(d);
  for (std::size_t i = 0; i < n; ++i) {
    logging.sample_into(rng, a, standard);
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(d);
    const double r = mean + (noise_sd > 0.0 ? noise_sd * standard(rng) : 0.0);
    b.add_continuous(0, a, logging.density(a), r);
  }
  return std::move(b).build();
}

double true_value(const Policy& policy, const Environment& env) {
  return true_value(policy, env.reward_model());
}

}  // namespace deltaope

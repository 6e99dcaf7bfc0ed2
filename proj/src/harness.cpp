#include "deltaope/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "deltaope/errors.hpp"

namespace deltaope {

Sign sign_of(double v) noexcept {
  if (v > 0.0) return Sign::kPositive;
  if (v < 0.0) return Sign::kNegative;
  return Sign::kZero;
}

std::vector<std::size_t> default_sample_sizes() {
  return {800, 3'200, 12'800, 51'200, 204'800, 819'200, 1'600'000};
}

void validate(const ExperimentConfig& c) {
  validate(c.environment);
  if (c.n_trials < 1) throw ConfigError("n_trials must be at least 1");
  if (c.sample_sizes.empty()) throw ConfigError("sample_sizes must not be empty");
  if (c.sample_sizes.front() < 2) throw ConfigError("sample sizes must be at least 2");
  for (std::size_t i = 1; i < c.sample_sizes.size(); ++i) {
    if (c.sample_sizes[i] <= c.sample_sizes[i - 1]) {
      throw ConfigError("sample_sizes must be strictly increasing");
    }
  }
  if (c.estimators.empty()) throw ConfigError("estimators must not be empty");
  std::set<Method> seen;
  for (Method m : c.estimators) {
    if (!seen.insert(m).second) {
      throw ConfigError("estimator '" + std::string(to_string(m)) + "' listed twice");
    }
  }
  if (!(c.ci_level > 0.0 && c.ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::set<std::string> experiment_keys = {"sample_sizes", "n_trials", "estimators",
                                                        "ci_level", "base_seed"};
  nlohmann::json env = nlohmann::json::object();
  for (const auto& item : j.items()) {
    if (!experiment_keys.contains(item.key())) env[item.key()] = item.value();
  }
  ExperimentConfig c;
  c.environment = environment_config_from_json(env);
  try {
    if (j.contains("sample_sizes")) {
      c.sample_sizes.clear();
      for (const auto& v : j.at("sample_sizes")) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
          throw ConfigError("sample_sizes must hold nonnegative integers");
        }
        c.sample_sizes.push_back(v.get<std::size_t>());
      }
    }
    if (j.contains("n_trials")) {
      if (!j.at("n_trials").is_number_integer() || j.at("n_trials").get<long long>() < 1) {
        throw ConfigError("n_trials must be a positive integer");
      }
      c.n_trials = j.at("n_trials").get<std::size_t>();
    }
    if (j.contains("estimators")) {
      c.estimators.clear();
      for (const auto& v : j.at("estimators")) {
        c.estimators.push_back(method_from_string(v.get<std::string>()));
      }
    }
    if (j.contains("ci_level")) c.ci_level = j.at("ci_level").get<double>();
    if (j.contains("base_seed")) {
      if (!j.at("base_seed").is_number_unsigned()) {
        throw ConfigError("base_seed must be a nonnegative integer");
      }
      c.base_seed = j.at("base_seed").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c.environment);
  j["sample_sizes"] = c.sample_sizes;
  j["n_trials"] = c.n_trials;
  auto& est = j["estimators"] = nlohmann::json::array();
  for (Method m : c.estimators) est.push_back(std::string(to_string(m)));
  j["ci_level"] = c.ci_level;
  j["base_seed"] = c.base_seed;
  return j;
}

bool detect_pointwise(const EstimateReport& report_target, const EstimateReport& report_production,
                      double level, Sign true_delta_sign) {
  const ConfidenceInterval t = confidence_interval(report_target, level);
  const ConfidenceInterval p = confidence_interval(report_production, level);
  const bool disjoint = t.lower > p.upper || p.lower > t.upper;
  if (!disjoint) return false;
  if (true_delta_sign == Sign::kZero) return true;
  return sign_of(report_target.estimate - report_production.estimate) == true_delta_sign;
}

bool detect_pairwise(const EstimateReport& report, Sign true_delta_sign, double level) {
  const ConfidenceInterval ci = confidence_interval(report, level);
  const bool excludes_zero = ci.lower > 0.0 || ci.upper < 0.0;
  if (!excludes_zero) return false;
  if (true_delta_sign == Sign::kZero) return true;
  return sign_of(report.estimate) == true_delta_sign;
}

const CellMetrics& ExperimentResult::cell(Method estimator, std::size_t n) const {
  for (const auto& c : cells) {
    if (c.estimator == estimator && c.n == n) return c;
  }
  throw std::out_of_range(fmt::format("no cell for {} at n = {}", to_string(estimator), n));
}

bool ExperimentResult::all_failed() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellMetrics& c) { return c.n_trials == 0; });
}

namespace {

struct TrialCell {
  bool ok = false;
  double estimate = 0.0;
  double squared_error = 0.0;
  double ci_width = 0.0;
  bool detected = false;
};

EstimateReport pointwise(Method m, std::span<const double> w, std::span<const double> r) {
  switch (m) {
    case Method::kIps: return ips_from_weights(w, r);
    case Method::kSnips: return snips_from_weights(w, r);
    case Method::kBetaIps: return beta_ips_from_weights(w, r);
    default: throw std::logic_error("not a pointwise estimator");
  }
}

EstimateReport pairwise(Method m, std::span<const double> wt, std::span<const double> wp,
                        std::span<const double> r) {
  switch (m) {
    case Method::kDeltaIps: return delta_ips_from_weights(wt, wp, r);
    case Method::kDeltaSnips: return delta_snips_from_weights(wt, wp, r);
    case Method::kDeltaBetaIps: return delta_beta_ips_from_weights(wt, wp, r);
    default: throw std::logic_error("not a pairwise estimator");
  }
}

TrialCell evaluate(Method m, std::span<const double> wt, std::span<const double> wp,
                   std::span<const double> r, double true_delta, double level) {
  TrialCell cell;
  const Sign truth = sign_of(true_delta);
  try {
    if (is_pairwise(m)) {
      const EstimateReport rep = pairwise(m, wt, wp, r);
      const ConfidenceInterval ci = confidence_interval(rep, level);
      cell.estimate = rep.estimate;
      cell.ci_width = ci.width();
      cell.detected = detect_pairwise(rep, truth, level);
    } else {
      const EstimateReport t = pointwise(m, wt, r);
      const EstimateReport p = pointwise(m, wp, r);
      cell.estimate = t.estimate - p.estimate;
      cell.detected = detect_pointwise(t, p, level, truth);
    }
  } catch (const DegenerateWeightsError&) {
    return {};
  } catch (const DegenerateBaselineError&) {
    return {};
  } catch (const InsufficientDataError&) {
    return {};
  }
  if (!std::isfinite(cell.estimate) || !std::isfinite(cell.ci_width)) return {};
  cell.ok = true;
  const double err = cell.estimate - true_delta;
  cell.squared_error = err * err;
  return cell;
}

struct Moments {
  double mean = 0.0;
  double standard_error = 0.0;
};

template <typename Get>
Moments moments(const std::vector<const TrialCell*>& cells, Get get) {
  const std::size_t k = cells.size();
  Moments m;
  if (k == 0) return m;
  double sum = 0.0;
  for (const TrialCell* c : cells) sum += get(*c);
  m.mean = sum / static_cast<double>(k);
  if (k >= 2) {
    double ss = 0.0;
    for (const TrialCell* c : cells) {
      const double dev = get(*c) - m.mean;
      ss += dev * dev;
    }
    m.standard_error = std::sqrt(ss / static_cast<double>(k - 1) / static_cast<double>(k));
  }
  return m;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned parallelism) {
  validate(config);
  const Environment env = build_environment(config.environment, config.base_seed);
  return run_experiment(config, env, parallelism);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Environment& env,
                                unsigned parallelism) {
  validate(config);
  const std::size_t n_trials = config.n_trials;
  const std::size_t n_sizes = config.sample_sizes.size();
  const std::size_t n_est = config.estimators.size();
  const std::size_t max_n = config.sample_sizes.back();
  const double true_delta = env.true_delta();

  std::vector<TrialCell> grid(n_trials * n_sizes * n_est);
  auto slot = [&](std::size_t trial, std::size_t s, std::size_t e) -> TrialCell& {
    return grid[(trial * n_sizes + s) * n_est + e];
  };

  auto run_trial = [&](std::size_t trial) {
    const LoggedDataset log = simulate_log(env, max_n, config.base_seed + trial);
    const std::vector<double> wt = importance_weights(log, env.target()).weights;
    const std::vector<double> wp = importance_weights(log, env.production()).weights;
    const auto r = log.rewards();
    for (std::size_t s = 0; s < n_sizes; ++s) {
      const std::size_t n = config.sample_sizes[s];
      const std::span<const double> wt_n(wt.data(), n);
      const std::span<const double> wp_n(wp.data(), n);
      const auto r_n = r.first(n);
      for (std::size_t e = 0; e < n_est; ++e) {
        slot(trial, s, e) = evaluate(config.estimators[e], wt_n, wp_n, r_n, true_delta,
                                     config.ci_level);
      }
    }
  };

  if (parallelism == 0) parallelism = std::max(1u, std::thread::hardware_concurrency());
  parallelism = static_cast<unsigned>(std::min<std::size_t>(parallelism, n_trials));
  if (parallelism <= 1) {
    for (std::size_t t = 0; t < n_trials; ++t) run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(parallelism);
    for (unsigned w = 0; w < parallelism; ++w) {
      workers.emplace_back([&] {
        for (std::size_t t = next++; t < n_trials; t = next++) {
          try {
            run_trial(t);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
  }

  ExperimentResult result;
  result.true_delta = true_delta;
  result.cells.reserve(n_est * n_sizes);
  std::vector<const TrialCell*> ok;
  ok.reserve(n_trials);
  for (std::size_t e = 0; e < n_est; ++e) {
    const Method m = config.estimators[e];
    for (std::size_t s = 0; s < n_sizes; ++s) {
      ok.clear();
      for (std::size_t t = 0; t < n_trials; ++t) {
        if (slot(t, s, e).ok) ok.push_back(&slot(t, s, e));
      }
      CellMetrics c;
      c.estimator = m;
      c.n = config.sample_sizes[s];
      c.n_trials = ok.size();
      c.n_failed = n_trials - ok.size();
      const auto mse = moments(ok, [](const TrialCell& x) { return x.squared_error; });
      const auto est = moments(ok, [](const TrialCell& x) { return x.estimate; });
      const auto power = moments(ok, [](const TrialCell& x) { return x.detected ? 1.0 : 0.0; });
      c.mse = mse.mean;
      c.se_mse = mse.standard_error;
      c.mean_estimate = est.mean;
      c.se_estimate = est.standard_error;
      c.power = power.mean;
      c.se_power = c.n_trials > 0
                       ? std::sqrt(c.power * (1.0 - c.power) / static_cast<double>(c.n_trials))
                       : 0.0;
      if (is_pairwise(m)) {
        const auto width = moments(ok, [](const TrialCell& x) { return x.ci_width; });
        c.mean_ci_width = width.mean;
        c.se_ci_width = width.standard_error;
      }
      result.cells.push_back(c);
    }
  }
  return result;
}

void write_results_csv(std::ostream& out, const ExperimentResult& result) {
  out << "estimator,n,mse,mean_ci_width,power,mean_estimate,n_trials,n_failed\n";
  for (const auto& c : result.cells) {
    std::string line = fmt::format("{},{},", to_string(c.estimator), c.n);
    if (c.n_trials > 0) {
      line += fmt::format("{:.17g},", c.mse);
      line += c.mean_ci_width ? fmt::format("{:.17g},", *c.mean_ci_width) : std::string(",");
      line += fmt::format("{:.17g},{:.17g},", c.power, c.mean_estimate);
    } else {
      line += ",,,,";
    }
    line += fmt::format("{},{}\n", c.n_trials, c.n_failed);
    out << line;
  }
}

nlohmann::json to_json(const ExperimentResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : result.cells) {
    const bool has = c.n_trials > 0;
    nlohmann::json row = {{"estimator", std::string(to_string(c.estimator))},
                          {"n", c.n},
                          {"mse", has ? nlohmann::json(c.mse) : nlohmann::json()},
                          {"mean_ci_width", has && c.mean_ci_width
                                                ? nlohmann::json(*c.mean_ci_width)
                                                : nlohmann::json()},
                          {"power", has ? nlohmann::json(c.power) : nlohmann::json()},
                          {"mean_estimate", has ? nlohmann::json(c.mean_estimate) : nlohmann::json()},
                          {"n_trials", c.n_trials},
                          {"n_failed", c.n_failed}};
    row["stderr"] = {
        {"mse", has ? nlohmann::json(c.se_mse) : nlohmann::json()},
        {"mean_ci_width",
         has && c.se_ci_width ? nlohmann::json(*c.se_ci_width) : nlohmann::json()},
        {"power", has ? nlohmann::json(c.se_power) : nlohmann::json()},
        {"mean_estimate", has ? nlohmann::json(c.se_estimate) : nlohmann::json()}};
    rows.push_back(std::move(row));
  }
  return {{"true_delta", result.true_delta}, {"results", std::move(rows)}};
}

}  // namespace deltaope

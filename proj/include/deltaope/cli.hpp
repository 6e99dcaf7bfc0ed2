#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "json.hpp"

#include "deltaope/crm.hpp"

namespace deltaope::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kInvalidConfig = 2,
  kAllTrialsFailed = 3,
};

struct EvalArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  unsigned parallelism = 0;  // 0: one worker per hardware thread
};

struct LearnArgs {
  std::filesystem::path config;
  std::filesystem::path out;
};

// Learning run description read from `learn --config`.
struct LearnRunConfig {
  std::size_t n = 100'000;
  std::uint64_t seed = 0;
  std::size_t holdout_n = 100'000;
  std::uint64_t holdout_seed = 1;
  double reward_noise_variance = 0.25;
  std::optional<std::filesystem::path> dataset;  // CSV log; simulated when absent
  LearnOptions options;
};

LearnRunConfig learn_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LearnRunConfig& config);

// Writes results.csv, results.json and config.json into args.out.
int run_eval(const EvalArgs& args, std::ostream& log);
// Writes policy.json, trace.csv, evaluation.json and config.json into args.out.
int run_learn(const LearnArgs& args, std::ostream& log);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace deltaope::cli

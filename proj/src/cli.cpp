#include "deltaope/cli.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "deltaope/errors.hpp"
#include "deltaope/estimators.hpp"
#include "deltaope/harness.hpp"
#include "deltaope/simulators.hpp"

namespace deltaope::cli {

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace

LearnRunConfig learn_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("learn config must be a JSON object");
  static const std::set<std::string> keys = {
      "n",         "seed",         "holdout_n",          "holdout_seed",
      "dataset",   "initial_mean", "pessimism",          "step_size",
      "objective", "max_iterations", "gradient_tolerance", "reward_noise_variance"};
  for (const auto& item : j.items()) {
    if (!keys.contains(item.key())) throw ConfigError("unknown learn key '" + item.key() + "'");
  }
  LearnRunConfig c;
  try {
    c.n = j.value("n", c.n);
    c.seed = j.value("seed", c.seed);
    c.holdout_n = j.value("holdout_n", c.holdout_n);
    c.holdout_seed = j.value("holdout_seed", c.seed + 1);
    c.reward_noise_variance = j.value("reward_noise_variance", c.reward_noise_variance);
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    if (j.contains("initial_mean")) {
      c.options.initial_mean = j.at("initial_mean").get<std::vector<double>>();
    }
    c.options.pessimism = j.value("pessimism", c.options.pessimism);
    c.options.step_size = j.value("step_size", c.options.step_size);
    c.options.max_iterations = j.value("max_iterations", c.options.max_iterations);
    c.options.gradient_tolerance = j.value("gradient_tolerance", c.options.gradient_tolerance);
    const std::string objective = j.value("objective", std::string("pairwise"));
    if (objective == "pairwise") {
      c.options.objective = ObjectiveKind::kPairwise;
    } else if (objective == "pointwise") {
      c.options.objective = ObjectiveKind::kPointwise;
    } else {
      throw ConfigError("'objective' must be \"pairwise\" or \"pointwise\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("learn config: ") + e.what());
  }
  if (c.n < 2 || c.holdout_n < 2) throw ConfigError("n and holdout_n must be at least 2");
  if (!(c.reward_noise_variance >= 0.0)) throw ConfigError("reward_noise_variance must be >= 0");
  if (!(c.options.pessimism >= 0.0)) throw ConfigError("pessimism must be nonnegative");
  if (!(c.options.step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (!(c.options.gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance must be > 0");
  if (!c.options.initial_mean.empty() &&
      c.options.initial_mean.size() != ContinuousEnvironment::kDim) {
    throw ConfigError(fmt::format("initial_mean must have {} entries", ContinuousEnvironment::kDim));
  }
  return c;
}

nlohmann::json to_json(const LearnRunConfig& c) {
  nlohmann::json j = {{"n", c.n},
                      {"seed", c.seed},
                      {"holdout_n", c.holdout_n},
                      {"holdout_seed", c.holdout_seed},
                      {"reward_noise_variance", c.reward_noise_variance},
                      {"pessimism", c.options.pessimism},
                      {"step_size", c.options.step_size},
                      {"max_iterations", c.options.max_iterations},
                      {"gradient_tolerance", c.options.gradient_tolerance},
                      {"objective", c.options.objective == ObjectiveKind::kPairwise ? "pairwise"
                                                                                     : "pointwise"}};
  if (c.dataset) j["dataset"] = c.dataset->string();
  if (!c.options.initial_mean.empty()) j["initial_mean"] = c.options.initial_mean;
  return j;
}

int run_eval(const EvalArgs& args, std::ostream& log) {
  ExperimentConfig config;
  try {
    config = experiment_config_from_json(read_json_file(args.config));
    if (args.trials) config.n_trials = *args.trials;
    if (args.seed) config.base_seed = *args.seed;
    validate(config);
  } catch (const ConfigError& e) {
    log << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }
  const ExperimentResult result = run_experiment(config, args.parallelism);

  std::filesystem::create_directories(args.out);
  std::ostringstream csv;
  write_results_csv(csv, result);
  write_text(args.out / "results.csv", csv.str());
  write_text(args.out / "results.json", dump(to_json(result)));
  write_text(args.out / "config.json", dump(to_json(config)));

  if (result.all_failed()) {
    log << "all trials failed\n";
    return kAllTrialsFailed;
  }
  std::size_t failed = 0;
  for (const auto& c : result.cells) failed += c.n_failed;
  log << fmt::format("wrote {} rows to {} (true delta {:.6g}, {} failed trial-cells)\n",
                     result.cells.size(), (args.out / "results.csv").string(), result.true_delta,
                     failed);
  return kSuccess;
}

int run_learn(const LearnArgs& args, std::ostream& log) {
  LearnRunConfig config;
  try {
    config = learn_config_from_json(read_json_file(args.config));
  } catch (const ConfigError& e) {
    log << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }
  const Environment env = build_continuous_env(config.reward_noise_variance);
  LoggedDataset dataset = [&] {
    if (!config.dataset) return simulate_log(env, config.n, config.seed);
    std::ifstream in(*config.dataset);
    if (!in) throw ConfigError("cannot open dataset " + config.dataset->string());
    return read_csv(in);
  }();

  const LearnResult learnt = learn_policy(dataset, env.production(), config.options);
  const Policy learnt_policy = learnt.policy;
  const double learnt_delta =
      true_value(learnt_policy, env) - true_value(env.production(), env);

  std::filesystem::create_directories(args.out);
  const nlohmann::json policy = {{"mean", learnt.policy.mean()},
                                 {"variance", learnt.policy.variance()},
                                 {"objective", learnt.trace.back().objective},
                                 {"iterations", learnt.trace.back().iteration},
                                 {"converged", learnt.converged},
                                 {"true_delta_vs_production", learnt_delta}};
  write_text(args.out / "policy.json", dump(policy));

  std::string trace = "iteration,objective,grad_norm,beta\n";
  for (const auto& row : learnt.trace) {
    trace += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", row.iteration, row.objective,
                         row.grad_norm, row.beta);
  }
  write_text(args.out / "trace.csv", trace);

  const LoggedDataset holdout = simulate_log(env, config.holdout_n, config.holdout_seed);
  const EstimateReport report = delta_beta_ips(holdout, learnt_policy, env.production());
  const nlohmann::json evaluation = {{"holdout_n", config.holdout_n},
                                     {"holdout_seed", config.holdout_seed},
                                     {"delta_beta_ips", to_json(report, 0.95)},
                                     {"true_delta", learnt_delta}};
  write_text(args.out / "evaluation.json", dump(evaluation));
  write_text(args.out / "config.json", dump(to_json(config)));

  log << fmt::format("learnt mean after {} iterations; true delta vs production {:.6g}\n",
                     learnt.trace.back().iteration, learnt_delta);
  return kSuccess;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pairwise off-policy estimation toolkit", "delta-ope"};
  app.require_subcommand(1);

  EvalArgs eval;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Run a replicated estimator evaluation");
  eval_cmd->add_option("--config", eval.config, "Experiment config (JSON)")->required();
  eval_cmd->add_option("--out", eval.out, "Output directory")->required();
  auto* trials_opt = eval_cmd->add_option("--trials", trials, "Override n_trials");
  auto* seed_opt = eval_cmd->add_option("--seed", seed, "Override base_seed");
  eval_cmd->add_option("--parallelism", eval.parallelism, "Worker threads (0 = all cores)");

  LearnArgs learn;
  auto* learn_cmd = app.add_subcommand("learn", "Learn a Gaussian policy from a lower bound");
  learn_cmd->add_option("--config", learn.config, "Learn config (JSON)")->required();
  learn_cmd->add_option("--out", learn.out, "Output directory")->required();

  auto* version_cmd = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*eval_cmd) {
      if (*trials_opt) eval.trials = trials;
      if (*seed_opt) eval.seed = seed;
      return run_eval(eval, err);
    }
    if (*learn_cmd) return run_learn(learn, err);
    if (*version_cmd) {
      out << "delta-ope " << kVersion << "\n";
      return kSuccess;
    }
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace deltaope::cli

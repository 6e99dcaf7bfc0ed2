#include "deltaope/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "deltaope/errors.hpp"

namespace deltaope {

LoggedDataset::Builder::Builder(ActionKind kind, std::size_t action_dim)
    : kind_(kind), dim_(kind == ActionKind::kDiscrete ? 0 : action_dim) {
  if (kind == ActionKind::kContinuous && action_dim == 0) {
    throw std::invalid_argument("continuous dataset needs a positive action dimension");
  }
}

void LoggedDataset::Builder::reserve(std::size_t n) {
  context_ids_.reserve(n);
  propensities_.reserve(n);
  rewards_.reserve(n);
  if (kind_ == ActionKind::kDiscrete) {
    discrete_actions_.reserve(n);
  } else {
    continuous_actions_.reserve(n * dim_);
  }
}

void LoggedDataset::Builder::add_discrete(std::size_t context_id, DiscreteAction action,
                                          double logging_propensity, double reward) {
  if (kind_ != ActionKind::kDiscrete) {
    throw std::invalid_argument("discrete sample added to a continuous dataset");
  }
  context_ids_.push_back(context_id);
  discrete_actions_.push_back(action);
  propensities_.push_back(logging_propensity);
  rewards_.push_back(reward);
}

void LoggedDataset::Builder::add_continuous(std::size_t context_id,
                                            std::span<const double> action,
                                            double logging_propensity, double reward) {
  if (kind_ != ActionKind::kContinuous) {
    throw std::invalid_argument("continuous sample added to a discrete dataset");
  }
  if (action.size() != dim_) {
    throw std::invalid_argument(
        fmt::format("action has dimension {}, dataset expects {}", action.size(), dim_));
  }
  context_ids_.push_back(context_id);
  continuous_actions_.insert(continuous_actions_.end(), action.begin(), action.end());
  propensities_.push_back(logging_propensity);
  rewards_.push_back(reward);
}

void LoggedDataset::Builder::add(const LoggedSample& sample) {
  if (const auto* a = std::get_if<DiscreteAction>(&sample.action)) {
    add_discrete(sample.context.id, *a, sample.logging_propensity, sample.reward);
  } else {
    add_continuous(sample.context.id, std::get<ContinuousAction>(sample.action),
                   sample.logging_propensity, sample.reward);
  }
}

LoggedDataset LoggedDataset::Builder::build() && { return LoggedDataset(std::move(*this)); }

namespace {

LoggedDataset::Builder builder_for(const std::vector<LoggedSample>& samples) {
  if (samples.empty()) throw InsufficientDataError("dataset needs at least 2 samples, got 0");
  const auto& first = samples.front().action;
  if (std::holds_alternative<DiscreteAction>(first)) {
    return LoggedDataset::Builder(ActionKind::kDiscrete);
  }
  return LoggedDataset::Builder(ActionKind::kContinuous,
                                std::get<ContinuousAction>(first).size());
}

}  // namespace

LoggedDataset::LoggedDataset(const std::vector<LoggedSample>& samples)
    : LoggedDataset([&] {
        auto b = builder_for(samples);
        b.reserve(samples.size());
        for (const auto& s : samples) b.add(s);
        return b;
      }()) {}

LoggedDataset::LoggedDataset(Builder&& b)
    : kind_(b.kind_),
      dim_(b.dim_),
      context_ids_(std::move(b.context_ids_)),
      discrete_actions_(std::move(b.discrete_actions_)),
      continuous_actions_(std::move(b.continuous_actions_)),
      propensities_(std::move(b.propensities_)),
      rewards_(std::move(b.rewards_)) {
  if (rewards_.size() < 2) {
    throw InsufficientDataError(
        fmt::format("dataset needs at least 2 samples, got {}", rewards_.size()));
  }
  for (std::size_t i = 0; i < propensities_.size(); ++i) {
    if (!(propensities_[i] > 0.0) || !std::isfinite(propensities_[i])) {
      throw SupportViolationError(
          fmt::format("sample {} has logging propensity {}", i, propensities_[i]));
    }
    if (!std::isfinite(rewards_[i])) {
      throw std::invalid_argument(fmt::format("sample {} has a non-finite reward", i));
    }
  }
}

LoggedSample LoggedDataset::sample(std::size_t i) const {
  LoggedSample s;
  s.context.id = context_ids_.at(i);
  if (kind_ == ActionKind::kDiscrete) {
    s.action = discrete_actions_[i];
  } else {
    const auto a = continuous_action(i);
    s.action = ContinuousAction(a.begin(), a.end());
  }
  s.logging_propensity = propensities_[i];
  s.reward = rewards_[i];
  return s;
}

LoggedDataset LoggedDataset::prefix(std::size_t n) const {
  if (n > size()) throw std::out_of_range("prefix longer than dataset");
  Builder b(kind_, dim_);
  b.context_ids_.assign(context_ids_.begin(), context_ids_.begin() + n);
  if (kind_ == ActionKind::kDiscrete) {
    b.discrete_actions_.assign(discrete_actions_.begin(), discrete_actions_.begin() + n);
  } else {
    b.continuous_actions_.assign(continuous_actions_.begin(),
                                 continuous_actions_.begin() + n * dim_);
  }
  b.propensities_.assign(propensities_.begin(), propensities_.begin() + n);
  b.rewards_.assign(rewards_.begin(), rewards_.begin() + n);
  return std::move(b).build();
}

std::vector<double> policy_log_propensities(const Policy& policy, const LoggedDataset& dataset) {
  std::vector<double> out(dataset.size());
  if (policy.kind() != dataset.kind()) {
    throw std::invalid_argument("policy and dataset action kinds differ");
  }
  if (dataset.kind() == ActionKind::kDiscrete) {
    const SoftmaxPolicy& pi = policy.softmax();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::log(pi.probability(dataset.context_id(i), dataset.discrete_action(i)));
    }
  } else {
    const GaussianPolicy& pi = policy.gaussian();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = pi.log_density(dataset.continuous_action(i));
    }
  }
  return out;
}

std::vector<double> policy_propensities(const Policy& policy, const LoggedDataset& dataset) {
  if (policy.kind() != dataset.kind()) {
    throw std::invalid_argument("policy and dataset action kinds differ");
  }
  std::vector<double> out(dataset.size());
  if (dataset.kind() == ActionKind::kDiscrete) {
    const SoftmaxPolicy& pi = policy.softmax();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = pi.probability(dataset.context_id(i), dataset.discrete_action(i));
    }
  } else {
    const GaussianPolicy& pi = policy.gaussian();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = pi.density(dataset.continuous_action(i));
    }
  }
  return out;
}

void write_csv(std::ostream& out, const LoggedDataset& dataset) {
  std::string line = "context_id,";
  if (dataset.kind() == ActionKind::kDiscrete) {
    line += "action,";
  } else {
    for (std::size_t j = 0; j < dataset.action_dim(); ++j) line += fmt::format("action_{},", j);
  }
  line += "logging_propensity,reward\n";
  out << line;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    line = fmt::format("{},", dataset.context_id(i));
    if (dataset.kind() == ActionKind::kDiscrete) {
      line += fmt::format("{},", dataset.discrete_action(i));
    } else {
      for (double v : dataset.continuous_action(i)) line += fmt::format("{:.17g},", v);
    }
    line += fmt::format("{:.17g},{:.17g}\n", dataset.logging_propensity(i), dataset.reward(i));
    out << line;
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_real(const std::string& s, std::size_t line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw std::invalid_argument(fmt::format("line {}: cannot parse '{}' as a real", line_no, s));
  }
  return v;
}

std::size_t parse_index(const std::string& s, std::size_t line_no) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s.front() == '-' || end != s.c_str() + s.size() || errno == ERANGE) {
    throw std::invalid_argument(
        fmt::format("line {}: cannot parse '{}' as an index", line_no, s));
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

LoggedDataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty dataset CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  const std::size_t n_cols = header.size();
  if (n_cols < 4 || header.front() != "context_id" || header[n_cols - 2] != "logging_propensity" ||
      header[n_cols - 1] != "reward") {
    throw std::invalid_argument("dataset CSV: unexpected header '" + line + "'");
  }
  const bool discrete = n_cols == 4 && header[1] == "action";
  std::size_t dim = 0;
  if (!discrete) {
    dim = n_cols - 3;
    for (std::size_t j = 0; j < dim; ++j) {
      if (header[1 + j] != fmt::format("action_{}", j)) {
        throw std::invalid_argument("dataset CSV: unexpected action column '" + header[1 + j] +
                                    "'");
      }
    }
  }
  LoggedDataset::Builder b(discrete ? ActionKind::kDiscrete : ActionKind::kContinuous, dim);
  std::vector<double> action(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n_cols) {
      throw std::invalid_argument(
          fmt::format("line {}: expected {} fields, got {}", line_no, n_cols, fields.size()));
    }
    const std::size_t ctx = parse_index(fields[0], line_no);
    const double prop = parse_real(fields[n_cols - 2], line_no);
    const double r = parse_real(fields[n_cols - 1], line_no);
    if (discrete) {
      b.add_discrete(ctx, parse_index(fields[1], line_no), prop, r);
    } else {
      for (std::size_t j = 0; j < dim; ++j) action[j] = parse_real(fields[1 + j], line_no);
      b.add_continuous(ctx, action, prop, r);
    }
  }
  return std::move(b).build();
}

}  // namespace deltaope

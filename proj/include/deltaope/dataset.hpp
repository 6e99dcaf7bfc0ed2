#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "deltaope/policy.hpp"

namespace deltaope {

struct LoggedSample {
  Context context;
  Action action;
  double logging_propensity = 0.0;
  double reward = 0.0;
};

// Logged bandit feedback collected under a logging policy, stored by column.
//
// Invariants: n >= 2, every logging propensity is finite and > 0, and all
// actions share one kind (and one dimension for continuous actions).
class LoggedDataset {
 public:
  explicit LoggedDataset(const std::vector<LoggedSample>& samples);

  class Builder {
   public:
    explicit Builder(ActionKind kind, std::size_t action_dim = 0);

    void reserve(std::size_t n);
    void add_discrete(std::size_t context_id, DiscreteAction action, double logging_propensity,
                      double reward);
    void add_continuous(std::size_t context_id, std::span<const double> action,
                        double logging_propensity, double reward);
    void add(const LoggedSample& sample);

    LoggedDataset build() &&;

   private:
    friend class LoggedDataset;
    ActionKind kind_;
    std::size_t dim_;
    std::vector<std::size_t> context_ids_;
    std::vector<std::size_t> discrete_actions_;
    std::vector<double> continuous_actions_;
    std::vector<double> propensities_;
    std::vector<double> rewards_;
  };

  std::size_t size() const noexcept { return rewards_.size(); }
  ActionKind kind() const noexcept { return kind_; }
  // 0 for discrete data.
  std::size_t action_dim() const noexcept { return dim_; }

  std::size_t context_id(std::size_t i) const { return context_ids_[i]; }
  DiscreteAction discrete_action(std::size_t i) const { return discrete_actions_[i]; }
  std::span<const double> continuous_action(std::size_t i) const {
    return {continuous_actions_.data() + i * dim_, dim_};
  }
  double logging_propensity(std::size_t i) const { return propensities_[i]; }
  double reward(std::size_t i) const { return rewards_[i]; }

  std::span<const double> rewards() const noexcept { return rewards_; }
  std::span<const double> logging_propensities() const noexcept { return propensities_; }

  LoggedSample sample(std::size_t i) const;
  // First n samples, in order.
  LoggedDataset prefix(std::size_t n) const;

  bool operator==(const LoggedDataset&) const = default;

 private:
  explicit LoggedDataset(Builder&& builder);

  ActionKind kind_;
  std::size_t dim_;
  std::vector<std::size_t> context_ids_;
  std::vector<std::size_t> discrete_actions_;
  std::vector<double> continuous_actions_;
  std::vector<double> propensities_;
  std::vector<double> rewards_;
};

// pi(a_i | x_i) for every logged sample.
std::vector<double> policy_propensities(const Policy& policy, const LoggedDataset& dataset);

// log pi(a_i | x_i) for every logged sample.
std::vector<double> policy_log_propensities(const Policy& policy, const LoggedDataset& dataset);

// CSV with header `context_id,action,logging_propensity,reward`; continuous
// data uses `action_0..action_{d-1}` columns. Reals keep 17 significant digits.
void write_csv(std::ostream& out, const LoggedDataset& dataset);
LoggedDataset read_csv(std::istream& in);

}  // namespace deltaope

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cabeval/replay.hpp"
#include "cabeval/reward_models.hpp"

namespace cabeval {

/// Cumulative regret after each accepted step. By default each increment is
/// r* - f(a_t) on noiseless means; with `realized` it is r* - r_t.
std::vector<double> cumulative_regret(const Trace& trace, const RewardModel& model,
                                      bool realized = false);

/// Running sum of recorded rewards; the last element equals the trace total.
std::vector<double> cumulative_reward(const Trace& trace);

inline constexpr double kBandZ = 1.96;

/// Per-step statistics over runs of unequal length. se[t] is NaN when fewer
/// than two runs survive to step t.
struct RunAggregate {
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<std::int64_t> survivors;
  std::int64_t runs = 0;

  std::int64_t steps() const { return static_cast<std::int64_t>(mean.size()); }
  /// Survivor count at 1-based step t (0 past the longest run).
  std::int64_t survivors_at(std::int64_t t) const;
};

/// Folds curves one at a time (Welford per step). Adding the same curves in
/// the same order always yields bit-identical aggregates.
class RunAccumulator {
 public:
  void add(const std::vector<double>& curve);
  std::int64_t added() const { return runs_; }
  RunAggregate finish() const;

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::vector<std::int64_t> n_;
  std::int64_t runs_ = 0;
};

RunAggregate aggregate_runs(const std::vector<std::vector<double>>& curves);

enum class RankMetric { Regret, Reward };

struct RankEntry {
  std::string policy;
  std::optional<double> value;  // empty: fewer than two runs reach t_eval
  std::optional<double> se;
  std::optional<int> rank;
  std::optional<int> tie_group;
};

struct RankTable {
  std::int64_t t_eval = 0;
  RankMetric metric = RankMetric::Regret;
  std::vector<RankEntry> entries;  // ranked policies first, then n/a ones
};

/// Orders policies at step t_eval (ascending regret or descending reward).
/// Neighbours whose mean +/- 1.96 se bands overlap share a tie group and a
/// rank; policies with fewer than two survivors at t_eval are reported n/a.
RankTable rank_at(const std::vector<std::pair<std::string, RunAggregate>>& aggregates,
                  std::int64_t t_eval, RankMetric metric);

/// `t,mean,se,n`; se is empty where undefined.
void write_aggregate_csv(const RunAggregate& agg, const std::filesystem::path& path);
/// `policy,metric_value,rank,tie_group`; unranked rows carry n/a.
void write_rank_csv(const RankTable& table, const std::filesystem::path& path);

/// Least-squares slope and R^2 of y against x = 1..n.
struct LinearFit {
  double slope;
  double intercept;
  double r_squared;
};
LinearFit fit_line(const std::vector<double>& y);

}  // namespace cabeval

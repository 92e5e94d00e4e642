#include "cabeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cabeval/format.hpp"

namespace cabeval {

std::vector<double> cumulative_regret(const Trace& trace, const RewardModel& model, bool realized) {
  const double r_star = model.optimum().r_star;
  std::vector<double> curve;
  curve.reserve(trace.records.size());
  double total = 0.0;
  for (const auto& rec : trace.records) {
    total += r_star - (realized ? rec.reward : model.mean(rec.action));
    curve.push_back(total);
  }
  return curve;
}

std::vector<double> cumulative_reward(const Trace& trace) {
  std::vector<double> curve;
  curve.reserve(trace.records.size());
  double total = 0.0;
  for (const auto& rec : trace.records) {
    total += rec.reward;
    curve.push_back(total);
  }
  return curve;
}

std::int64_t RunAggregate::survivors_at(std::int64_t t) const {
  if (t < 1 || t > steps()) return 0;
  return survivors[static_cast<std::size_t>(t - 1)];
}

void RunAccumulator::add(const std::vector<double>& curve) {
  if (curve.size() > mean_.size()) {
    mean_.resize(curve.size(), 0.0);
    m2_.resize(curve.size(), 0.0);
    n_.resize(curve.size(), 0);
  }
  for (std::size_t t = 0; t < curve.size(); ++t) {
    const auto n = ++n_[t];
    const double d = curve[t] - mean_[t];
    mean_[t] += d / static_cast<double>(n);
    m2_[t] += d * (curve[t] - mean_[t]);
  }
  ++runs_;
}

RunAggregate RunAccumulator::finish() const {
  RunAggregate agg;
  agg.runs = runs_;
  agg.mean = mean_;
  agg.survivors = n_;
  agg.se.assign(mean_.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < mean_.size(); ++t) {
    const auto n = n_[t];
    if (n >= 2) {
      agg.se[t] = std::sqrt(m2_[t] / static_cast<double>(n - 1) / static_cast<double>(n));
    }
  }
  return agg;
}

RunAggregate aggregate_runs(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw std::invalid_argument("aggregate_runs needs at least one curve");
  RunAccumulator acc;
  for (const auto& c : curves) acc.add(c);
  return acc.finish();
}

RankTable rank_at(const std::vector<std::pair<std::string, RunAggregate>>& aggregates,
                  std::int64_t t_eval, RankMetric metric) {
  if (t_eval < 1) throw std::invalid_argument("t_eval must be >= 1");
  RankTable table;
  table.t_eval = t_eval;
  table.metric = metric;

  std::vector<RankEntry> ranked, unranked;
  for (const auto& [name, agg] : aggregates) {
    RankEntry e;
    e.policy = name;
    if (agg.survivors_at(t_eval) >= 2) {
      const auto idx = static_cast<std::size_t>(t_eval - 1);
      e.value = agg.mean[idx];
      e.se = agg.se[idx];
      ranked.push_back(std::move(e));
    } else {
      unranked.push_back(std::move(e));
    }
  }

  // Better first: low regret or high reward.
  std::stable_sort(ranked.begin(), ranked.end(), [metric](const RankEntry& a, const RankEntry& b) {
    return metric == RankMetric::Regret ? *a.value < *b.value : *a.value > *b.value;
  });

  int group = 0;
  int group_rank = 1;
  double group_bound = 0.0;  // outer band edge of the current group
  for (std::size_t j = 0; j < ranked.size(); ++j) {
    auto& e = ranked[j];
    const double half = kBandZ * *e.se;
    const double inner = metric == RankMetric::Regret ? *e.value - half : *e.value + half;
    const double outer = metric == RankMetric::Regret ? *e.value + half : *e.value - half;
    const bool overlaps =
        j > 0 && (metric == RankMetric::Regret ? inner <= group_bound : inner >= group_bound);
    if (!overlaps) {
      ++group;
      group_rank = static_cast<int>(j) + 1;
      group_bound = outer;
    } else {
      group_bound =
          metric == RankMetric::Regret ? std::max(group_bound, outer) : std::min(group_bound, outer);
    }
    e.rank = group_rank;
    e.tie_group = group;
  }

  table.entries = std::move(ranked);
  for (auto& e : unranked) table.entries.push_back(std::move(e));
  return table;
}

void write_aggregate_csv(const RunAggregate& agg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "t,mean,se,n\n";
  for (std::int64_t t = 1; t <= agg.steps(); ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    out << t << ',' << format_double(agg.mean[i]) << ',';
    if (!std::isnan(agg.se[i])) out << format_double(agg.se[i]);
    out << ',' << agg.survivors[i] << '\n';
  }
}

void write_rank_csv(const RankTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "policy,metric_value,rank,tie_group\n";
  for (const auto& e : table.entries) {
    out << e.policy << ',';
    if (e.value) {
      out << format_double(*e.value) << ',' << *e.rank << ',' << *e.tie_group << '\n';
    } else {
      out << "n/a,n/a,n/a\n";
    }
  }
}

LinearFit fit_line(const std::vector<double>& y) {
  const auto n = static_cast<double>(y.size());
  if (y.size() < 2) throw std::invalid_argument("fit_line needs at least two points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sx += static_cast<double>(i + 1);
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dx = static_cast<double>(i + 1) - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return {slope, my - slope * mx, r2};
}

}  // namespace cabeval

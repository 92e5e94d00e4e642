#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cabeval/config.hpp"
#include "cabeval/metrics.hpp"

namespace cabeval {

struct RunError {
  std::int64_t repetition;
  std::string policy;
  std::optional<double> delta;
  std::string message;
};

/// Aggregated results for one (policy, delta) pair. Online cells have no
/// delta. `accepted[r]` is the accepted count of repetition r, or -1 if the
/// run failed.
struct ResultCell {
  std::string policy;
  std::optional<double> delta;
  RankMetric metric = RankMetric::Regret;
  RunAggregate aggregate;
  std::vector<std::int64_t> accepted;
};

struct RankResult {
  std::optional<double> delta;
  RankTable table;
};

struct ModelRecord {
  std::string family;
  std::vector<std::pair<std::string, double>> parameters;
};

struct ResultSet {
  Mode mode = Mode::Online;
  std::vector<ResultCell> cells;  // ordered by (delta, policy) as configured
  std::vector<RankResult> ranks;
  std::vector<RunError> errors;
  std::vector<std::string> warnings;
  std::vector<ModelRecord> models;  // one per repetition; empty for ingest

  const ResultCell& cell(const std::string& policy, std::optional<double> delta = {}) const;
  const RankTable& rank(std::optional<double> delta = {}) const;
};

/// Online simulation: per repetition a fresh model shared by all policies;
/// each policy runs `length` propose/sample/update steps.
ResultSet run_online(const ExperimentConfig& cfg);

/// Offline replay: per repetition a fresh model and logged stream of
/// `length` events, replayed by a fresh instance of every policy at every
/// delta.
ResultSet run_offline(const ExperimentConfig& cfg);

/// Replays a fixed logged stream `repetitions` times per (policy, delta)
/// and reports cumulative reward only.
ResultSet run_ingest(const ExperimentConfig& cfg);

ResultSet run_experiment(const ExperimentConfig& cfg);

/// Writes aggregate CSVs, rank tables and manifest.json into
/// cfg.output_dir. Returns the written file paths in write order.
std::vector<std::filesystem::path> write_results(const ResultSet& results,
                                                 const ExperimentConfig& cfg);

/// File stem for a cell, e.g. "offline_TBL_delta0.1".
std::string cell_file_stem(Mode mode, const std::string& policy, std::optional<double> delta);

}  // namespace cabeval

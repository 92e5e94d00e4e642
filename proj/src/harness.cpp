#include "cabeval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <fstream>
#include <functional>
#include <thread>

#include <json.hpp>

#include "cabeval/format.hpp"
#include "cabeval/random.hpp"
#include "cabeval/replay.hpp"

namespace cabeval {

namespace {

using Json = nlohmann::json;

struct CellRun {
  std::vector<double> curve;
  std::int64_t accepted = -1;
  std::optional<std::string> error;
};

struct RepOutput {
  std::vector<CellRun> cells;
  std::optional<ModelRecord> model;
};

std::uint64_t tag(SeedRole role) { return static_cast<std::uint64_t>(role); }
std::uint64_t delta_key(double delta) { return std::bit_cast<std::uint64_t>(delta); }

/// Runs `work(rep)` for every repetition on up to `workers` threads and folds
/// the outputs strictly in repetition order, so the result never depends on
/// scheduling.
void for_each_repetition(std::int64_t reps, int workers,
                         const std::function<RepOutput(std::int64_t)>& work,
                         const std::function<void(std::int64_t, RepOutput&&)>& fold) {
  const std::int64_t chunk = std::max<std::int64_t>(1, static_cast<std::int64_t>(workers) * 4);
  std::vector<RepOutput> slots;
  for (std::int64_t begin = 0; begin < reps; begin += chunk) {
    const std::int64_t end = std::min(reps, begin + chunk);
    slots.assign(static_cast<std::size_t>(end - begin), RepOutput{});
    if (workers <= 1) {
      for (std::int64_t r = begin; r < end; ++r) slots[static_cast<std::size_t>(r - begin)] = work(r);
    } else {
      std::atomic<std::int64_t> next{begin};
      std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::int64_t r = next++; r < end; r = next++) {
              slots[static_cast<std::size_t>(r - begin)] = work(r);
            }
          } catch (...) {
            failures[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& f : failures) {
        if (f) std::rethrow_exception(f);
      }
    }
    for (std::int64_t r = begin; r < end; ++r) {
      fold(r, std::move(slots[static_cast<std::size_t>(r - begin)]));
    }
  }
}

RewardModel draw_model(const ExperimentConfig& cfg, Rng& rng) {
  if (cfg.family == Family::Parabola) {
    return make_parabola(rng, cfg.range, cfg.noise_var, cfg.parabola_scale);
  }
  return make_bimodal(rng, cfg.range, cfg.noise_var);
}

/// Collects per-cell accumulators, accepted counts and errors.
class Collector {
 public:
  Collector(ResultSet& results, const std::vector<ResultCell>& layout, std::int64_t reps)
      : results_(results), acc_(layout.size()) {
    results_.cells = layout;
    for (auto& c : results_.cells) c.accepted.assign(static_cast<std::size_t>(reps), -1);
  }

  void fold(std::int64_t rep, RepOutput&& out) {
    for (std::size_t c = 0; c < out.cells.size(); ++c) {
      auto& run = out.cells[c];
      auto& cell = results_.cells[c];
      if (run.error) {
        results_.errors.push_back({rep, cell.policy, cell.delta, *run.error});
        continue;
      }
      acc_[c].add(run.curve);
      cell.accepted[static_cast<std::size_t>(rep)] = run.accepted;
    }
    if (out.model) results_.models.push_back(std::move(*out.model));
  }

  void finish(const ExperimentConfig& cfg, RankMetric metric) {
    for (std::size_t c = 0; c < acc_.size(); ++c) results_.cells[c].aggregate = acc_[c].finish();
    // One rank table per delta (or one for online), in configured order.
    std::vector<std::optional<double>> groups;
    for (const auto& cell : results_.cells) {
      if (std::find(groups.begin(), groups.end(), cell.delta) == groups.end()) {
        groups.push_back(cell.delta);
      }
    }
    for (const auto& d : groups) {
      std::vector<std::pair<std::string, RunAggregate>> named;
      for (const auto& cell : results_.cells) {
        if (cell.delta == d) named.emplace_back(cell.policy, cell.aggregate);
      }
      results_.ranks.push_back({d, rank_at(named, cfg.t_eval, metric)});
    }
  }

 private:
  ResultSet& results_;
  std::vector<RunAccumulator> acc_;
};

std::vector<ResultCell> cell_layout(const ExperimentConfig& cfg, RankMetric metric,
                                    bool with_delta) {
  std::vector<ResultCell> layout;
  if (!with_delta) {
    for (const auto& p : cfg.policies) layout.push_back({p.label, std::nullopt, metric, {}, {}});
    return layout;
  }
  for (double d : cfg.deltas) {
    for (const auto& p : cfg.policies) layout.push_back({p.label, d, metric, {}, {}});
  }
  return layout;
}

CellRun replay_one(const PolicySpec& spec, const LoggedStream& stream, double delta,
                   std::uint64_t seed, std::int64_t rep,
                   const std::function<std::vector<double>(const Trace&)>& curve_of) {
  CellRun run;
  try {
    const std::uint64_t key = label_hash(spec.label);
    Rng init = make_rng(seed, {static_cast<std::uint64_t>(rep), key, tag(SeedRole::PolicyInit),
                               delta_key(delta)});
    Rng propose = make_rng(seed, {static_cast<std::uint64_t>(rep), key,
                                  tag(SeedRole::PolicyPropose), delta_key(delta)});
    PolicyState policy = PolicyState::from_params(spec.params, stream.range, init);
    ReplayConfig rc;
    rc.delta = delta;
    const Trace trace = replay_cab(policy, stream, rc, propose);
    run.curve = curve_of(trace);
    run.accepted = trace.accepted();
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

}  // namespace

const ResultCell& ResultSet::cell(const std::string& policy, std::optional<double> delta) const {
  for (const auto& c : cells) {
    if (c.policy == policy && c.delta == delta) return c;
  }
  throw std::out_of_range("no result cell for policy " + policy);
}

const RankTable& ResultSet::rank(std::optional<double> delta) const {
  for (const auto& r : ranks) {
    if (r.delta == delta) return r.table;
  }
  throw std::out_of_range("no rank table for the requested delta");
}

ResultSet run_online(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultSet results;
  results.mode = Mode::Online;
  Collector collector(results, cell_layout(cfg, RankMetric::Regret, false), cfg.repetitions);

  const auto work = [&](std::int64_t rep) {
    RepOutput out;
    out.cells.resize(cfg.policies.size());
    const auto urep = static_cast<std::uint64_t>(rep);
    std::optional<RewardModel> model;
    try {
      Rng model_rng = make_rng(cfg.master_seed, {urep, tag(SeedRole::OnlineModel)});
      model = draw_model(cfg, model_rng);
      out.model = ModelRecord{model->family(), model->parameters()};
    } catch (const std::exception& e) {
      for (auto& c : out.cells) c.error = std::string("model: ") + e.what();
      return out;
    }
    for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
      const auto& spec = cfg.policies[p];
      auto& run = out.cells[p];
      try {
        const std::uint64_t key = label_hash(spec.label);
        Rng init = make_rng(cfg.master_seed, {urep, key, tag(SeedRole::PolicyInit)});
        Rng propose = make_rng(cfg.master_seed, {urep, key, tag(SeedRole::PolicyPropose)});
        Rng noise = make_rng(cfg.master_seed, {urep, key, tag(SeedRole::OnlineNoise)});
        PolicyState policy = PolicyState::from_params(spec.params, cfg.range, init);
        Trace trace;
        trace.records.reserve(static_cast<std::size_t>(cfg.length));
        for (std::int64_t t = 0; t < cfg.length; ++t) {
          const double a = policy.propose(propose);
          const double r = model->sample(a, noise);
          policy.update(a, r);
          trace.append(t, a, r);
        }
        run.curve = cumulative_regret(trace, *model, cfg.realized_regret);
        run.accepted = trace.accepted();
      } catch (const std::exception& e) {
        run.error = e.what();
      }
    }
    return out;
  };

  for_each_repetition(cfg.repetitions, cfg.workers, work,
                      [&](std::int64_t rep, RepOutput&& out) { collector.fold(rep, std::move(out)); });
  collector.finish(cfg, RankMetric::Regret);
  return results;
}

ResultSet run_offline(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultSet results;
  results.mode = Mode::Offline;
  Collector collector(results, cell_layout(cfg, RankMetric::Regret, true), cfg.repetitions);

  const auto work = [&](std::int64_t rep) {
    RepOutput out;
    out.cells.resize(cfg.deltas.size() * cfg.policies.size());
    const auto urep = static_cast<std::uint64_t>(rep);
    std::optional<RewardModel> model;
    LoggedStream stream;
    try {
      Rng model_rng = make_rng(cfg.master_seed, {urep, tag(SeedRole::OfflineModel)});
      model = draw_model(cfg, model_rng);
      out.model = ModelRecord{model->family(), model->parameters()};
      Rng stream_rng = make_rng(cfg.master_seed, {urep, tag(SeedRole::LoggedStream)});
      stream = generate_logged_stream(*model, cfg.length, stream_rng);
    } catch (const std::exception& e) {
      for (auto& c : out.cells) c.error = std::string("model: ") + e.what();
      return out;
    }
    const auto regret_of = [&](const Trace& trace) {
      return cumulative_regret(trace, *model, cfg.realized_regret);
    };
    std::size_t c = 0;
    for (double delta : cfg.deltas) {
      for (const auto& spec : cfg.policies) {
        out.cells[c++] = replay_one(spec, stream, delta, cfg.master_seed, rep, regret_of);
      }
    }
    return out;
  };

  for_each_repetition(cfg.repetitions, cfg.workers, work,
                      [&](std::int64_t rep, RepOutput&& out) { collector.fold(rep, std::move(out)); });
  collector.finish(cfg, RankMetric::Regret);
  return results;
}

ResultSet run_ingest(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultSet results;
  results.mode = Mode::Ingest;
  const LoggedStream stream = load_stream(
      cfg.stream_path, cfg.range, [&](const std::string& w) { results.warnings.push_back(w); });
  for (double delta : cfg.deltas) {
    const double expected = acceptance_probability(delta, cfg.range) * static_cast<double>(stream.length());
    if (expected < static_cast<double>(cfg.t_eval)) {
      results.warnings.push_back("delta " + format_short(delta) + ": expected accepted count " +
                                 format_short(expected) + " is below t_eval " +
                                 std::to_string(cfg.t_eval));
    }
  }
  Collector collector(results, cell_layout(cfg, RankMetric::Reward, true), cfg.repetitions);

  const auto work = [&](std::int64_t rep) {
    RepOutput out;
    out.cells.reserve(cfg.deltas.size() * cfg.policies.size());
    for (double delta : cfg.deltas) {
      for (const auto& spec : cfg.policies) {
        out.cells.push_back(replay_one(spec, stream, delta, cfg.master_seed, rep,
                                       [](const Trace& t) { return cumulative_reward(t); }));
      }
    }
    return out;
  };

  for_each_repetition(cfg.repetitions, cfg.workers, work,
                      [&](std::int64_t rep, RepOutput&& out) { collector.fold(rep, std::move(out)); });
  collector.finish(cfg, RankMetric::Reward);
  return results;
}

ResultSet run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.mode) {
    case Mode::Online: return run_online(cfg);
    case Mode::Offline: return run_offline(cfg);
    default: return run_ingest(cfg);
  }
}

std::string cell_file_stem(Mode mode, const std::string& policy, std::optional<double> delta) {
  std::string stem = to_string(mode) + "_" + policy;
  if (delta) stem += "_delta" + format_short(*delta);
  return stem;
}

namespace {

Json config_echo(const ExperimentConfig& cfg) {
  Json j;
  j["mode"] = to_string(cfg.mode);
  if (cfg.mode != Mode::Ingest) {
    j["family"] = to_string(cfg.family);
    j["noise_var"] = cfg.noise_var;
    j["parabola_scale"] = cfg.parabola_scale;
    j["length"] = cfg.length;
    j["realized_regret"] = cfg.realized_regret;
  } else {
    j["stream"] = cfg.stream_path.string();
  }
  j["range"] = {cfg.range.lo, cfg.range.hi};
  j["repetitions"] = cfg.repetitions;
  if (cfg.mode != Mode::Online) j["deltas"] = cfg.deltas;
  j["seed"] = cfg.master_seed;
  j["t_eval"] = cfg.t_eval;
  Json policies = Json::array();
  for (const auto& p : cfg.policies) {
    Json pj;
    pj["label"] = p.label;
    pj["kind"] = policy_kind(p.params);
    for (const auto& [k, v] : describe(p.params)) pj["params"][k] = v;
    policies.push_back(pj);
  }
  j["policies"] = policies;
  return j;
}

std::string delta_label(std::optional<double> delta) {
  return delta ? format_short(*delta) : std::string("online");
}

}  // namespace

std::vector<std::filesystem::path> write_results(const ResultSet& results,
                                                 const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  std::vector<std::filesystem::path> written;

  for (const auto& cell : results.cells) {
    const auto path = cfg.output_dir / (cell_file_stem(results.mode, cell.policy, cell.delta) + ".csv");
    write_aggregate_csv(cell.aggregate, path);
    written.push_back(path);
  }
  for (const auto& r : results.ranks) {
    std::string name = "rank_" + to_string(results.mode);
    if (r.delta) name += "_delta" + format_short(*r.delta);
    const auto path = cfg.output_dir / (name + ".csv");
    write_rank_csv(r.table, path);
    written.push_back(path);
  }

  Json manifest;
  manifest["config"] = config_echo(cfg);
  manifest["metric"] = results.mode == Mode::Ingest ? "cumulative_reward" : "cumulative_regret";
  manifest["seed_derivation"] =
      "splitmix64 chain over (master_seed, repetition, fnv1a(policy label), role[, delta bits]); "
      "roles: 1 online model, 2 offline model, 3 logged stream, 4 policy init, 5 policy propose, "
      "6 online noise";
  Json runs = Json::array();
  for (const auto& cell : results.cells) {
    Json rj;
    rj["policy"] = cell.policy;
    rj["delta"] = delta_label(cell.delta);
    rj["accepted"] = cell.accepted;
    rj["completed_runs"] = cell.aggregate.runs;
    runs.push_back(rj);
  }
  manifest["runs"] = runs;
  Json errors = Json::array();
  for (const auto& e : results.errors) {
    errors.push_back({{"repetition", e.repetition},
                      {"policy", e.policy},
                      {"delta", delta_label(e.delta)},
                      {"message", e.message}});
  }
  manifest["errors"] = errors;
  manifest["warnings"] = results.warnings;
  Json models = Json::array();
  for (const auto& m : results.models) {
    Json mj;
    mj["family"] = m.family;
    for (const auto& [k, v] : m.parameters) mj["parameters"][k] = v;
    models.push_back(mj);
  }
  manifest["models"] = models;

  const auto path = cfg.output_dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << manifest.dump(2) << '\n';
  written.push_back(path);
  return written;
}

}  // namespace cabeval

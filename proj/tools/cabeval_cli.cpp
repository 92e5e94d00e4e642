// Command-line front end: run experiments, validate configs, size logs and
// generate synthetic logged streams.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cabeval/config.hpp"
#include "cabeval/format.hpp"
#include "cabeval/harness.hpp"
#include "cabeval/replay.hpp"

using namespace cabeval;

int main(int argc, char** argv) {
  CLI::App app{"Offline replay evaluation of continuous-armed bandit policies"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode_text;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> workers;

  auto* run = app.add_subcommand("run", "Run an online, offline or ingest experiment");
  run->add_option("--config", config_path, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode_text, "Override experiment mode")
      ->check(CLI::IsMember({"online", "offline", "ingest"}));
  run->add_option("--seed", seed, "Override master seed");
  run->add_option("--out", out_dir, "Override output directory");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config file and print the resolved settings");
  validate->add_option("--config", config_path, "Experiment config (INI)")->required();

  std::int64_t t_prime = 0;
  double delta = 0.0;
  std::vector<double> range_bounds;
  auto* sizing = app.add_subcommand("sizing", "Logged stream length needed for an expected accepted count");
  sizing->add_option("--t-prime", t_prime, "Desired accepted interactions")->required()->check(CLI::PositiveNumber);
  sizing->add_option("--delta", delta, "Acceptance tolerance")->required()->check(CLI::PositiveNumber);
  sizing->add_option("--range", range_bounds, "Action range LO HI")->expected(2)->required();

  std::string family = "parabola";
  std::int64_t length = 0;
  double noise_var = 0.01;
  std::uint64_t gen_seed = 0;
  std::string stream_out;
  std::vector<double> gen_range{0.0, 1.0};
  auto* generate = app.add_subcommand("generate", "Write a synthetic uniform-random logged stream");
  generate->add_option("--family", family, "Reward family")->check(CLI::IsMember({"parabola", "bimodal"}));
  generate->add_option("--length", length, "Number of events")->required()->check(CLI::PositiveNumber);
  generate->add_option("--noise-var", noise_var, "Reward noise variance");
  generate->add_option("--seed", gen_seed, "Seed");
  generate->add_option("--range", gen_range, "Action range LO HI")->expected(2);
  generate->add_option("--out", stream_out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::optional<Mode> mode;
      if (!mode_text.empty()) mode = parse_mode(mode_text);
      ExperimentConfig cfg = parse_config(config_path, mode);
      if (seed) cfg.master_seed = *seed;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (workers) cfg.workers = *workers;
      cfg.validate();
      const ResultSet results = run_experiment(cfg);
      for (const auto& w : results.warnings) std::cerr << "warning: " << w << '\n';
      const auto files = write_results(results, cfg);
      for (const auto& r : results.ranks) {
        std::cout << "rank " << to_string(cfg.mode);
        if (r.delta) std::cout << " delta=" << format_short(*r.delta);
        std::cout << " at t=" << r.table.t_eval << ":";
        for (const auto& e : r.table.entries) {
          std::cout << ' ' << e.policy << '=';
          if (e.rank) std::cout << *e.rank; else std::cout << "n/a";
        }
        std::cout << '\n';
      }
      std::cout << "wrote " << files.size() << " files to " << cfg.output_dir.string() << '\n';
      if (!results.errors.empty()) {
        std::cerr << results.errors.size() << " run(s) failed; see manifest.json\n";
      }
    } else if (*validate) {
      const ExperimentConfig cfg = parse_config(config_path);
      std::cout << "ok: mode=" << to_string(cfg.mode) << " repetitions=" << cfg.repetitions
                << " policies=";
      for (std::size_t i = 0; i < cfg.policies.size(); ++i) {
        std::cout << (i ? "," : "") << cfg.policies[i].label;
      }
      std::cout << '\n';
    } else if (*sizing) {
      const ActionRange range(range_bounds[0], range_bounds[1]);
      std::cout << required_log_length(t_prime, delta, range) << '\n';
    } else if (*generate) {
      const ActionRange range(gen_range.at(0), gen_range.at(1));
      // Same derivation as repetition 0 of an offline run with this seed.
      Rng model_rng = make_rng(gen_seed, {0, static_cast<std::uint64_t>(SeedRole::OfflineModel)});
      Rng stream_rng = make_rng(gen_seed, {0, static_cast<std::uint64_t>(SeedRole::LoggedStream)});
      const RewardModel model = family == "parabola"
                                    ? RewardModel(make_parabola(model_rng, range, noise_var))
                                    : RewardModel(make_bimodal(model_rng, range, noise_var));
      save_stream(generate_logged_stream(model, length, stream_rng), stream_out);
      std::cout << "wrote " << length << " events (" << model.family();
      for (const auto& [k, v] : model.parameters()) std::cout << ' ' << k << '=' << format_short(v);
      std::cout << ") to " << stream_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

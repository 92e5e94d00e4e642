#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cabeval/policies.hpp"
#include "cabeval/reward_models.hpp"

namespace cabeval {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { Online, Offline, Ingest };
enum class Family { Parabola, Bimodal };

std::string to_string(Mode mode);
std::string to_string(Family family);
Mode parse_mode(const std::string& text);

/// Everything needed to reproduce one experiment.
struct ExperimentConfig {
  Mode mode = Mode::Online;
  Family family = Family::Parabola;
  ActionRange range{0.0, 1.0};
  double noise_var = 0.01;
  double parabola_scale = 1.0;
  std::vector<PolicySpec> policies;
  std::int64_t repetitions = 1000;
  std::int64_t length = 10000;
  std::vector<double> deltas{0.01, 0.05, 0.1, 0.2, 0.5};
  std::uint64_t master_seed = 0;
  std::int64_t t_eval = 1750;
  std::filesystem::path output_dir = "out";
  std::filesystem::path stream_path;
  bool realized_regret = false;
  int workers = 1;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// The four policies with their default parameters. EF explores for 2000
/// steps in simulation modes and 100 in ingest mode.
std::vector<PolicySpec> default_policies(Mode mode);

ExperimentConfig default_config(Mode mode);

/// INI-style configuration. Recognized sections: [experiment], [UR], [EF],
/// [TBL], [LiF]. Unknown sections or keys are errors. `mode_override`
/// replaces experiment.mode before mode-dependent defaults are applied.
ExperimentConfig parse_config(const std::filesystem::path& path,
                              std::optional<Mode> mode_override = std::nullopt);
ExperimentConfig parse_config_text(const std::string& text,
                                   std::optional<Mode> mode_override = std::nullopt);

}  // namespace cabeval

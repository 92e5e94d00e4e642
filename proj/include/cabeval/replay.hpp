#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cabeval/random.hpp"
#include "cabeval/reward_models.hpp"

namespace cabeval {

struct LoggedEvent {
  std::int64_t index;
  double action;
  double reward;
};

/// Logged interactions collected under uniform-random action selection.
struct LoggedStream {
  std::vector<LoggedEvent> events;
  ActionRange range;

  std::int64_t length() const { return static_cast<std::int64_t>(events.size()); }
};

struct ReplayConfig {
  double delta = 0.1;
  // Accepted events update the policy with its own proposal, never the
  // logged action. Kept as a field so result metadata can echo it.
  static constexpr bool update_with_proposal = true;

  /// Throws std::invalid_argument unless delta > 0. Experiment configs
  /// additionally keep delta below the range width.
  void validate() const;
};

struct TraceRecord {
  std::int64_t stream_index;
  double action;
  double reward;
};

/// Accepted interactions of one evaluation run.
struct Trace {
  std::vector<TraceRecord> records;
  double cumulative_reward = 0.0;

  std::int64_t accepted() const { return static_cast<std::int64_t>(records.size()); }

  void append(std::int64_t index, double action, double reward) {
    records.push_back({index, action, reward});
    cumulative_reward += reward;
  }
};

template <class P>
concept ReplayablePolicy = requires(P& policy, const P& cpolicy, Rng& rng, double a, double r) {
  { cpolicy.propose(rng) } -> std::convertible_to<double>;
  policy.update(a, r);
};

/// Exact-match replay: an event counts only when the proposal equals the
/// logged action. For finite action alphabets.
template <ReplayablePolicy P>
Trace replay_discrete(P& policy, const LoggedStream& stream, Rng& rng) {
  Trace trace;
  for (const auto& ev : stream.events) {
    const double proposal = policy.propose(rng);
    if (proposal == ev.action) {
      policy.update(ev.action, ev.reward);
      trace.append(ev.index, ev.action, ev.reward);
    }
  }
  return trace;
}

/// Tolerance replay for continuous actions. One proposal per event; the
/// event is accepted when |logged - proposal| < delta and the policy is then
/// updated with (proposal, logged reward).
template <ReplayablePolicy P>
Trace replay_cab(P& policy, const LoggedStream& stream, const ReplayConfig& cfg, Rng& rng) {
  cfg.validate();
  Trace trace;
  trace.records.reserve(static_cast<std::size_t>(
      std::ceil(static_cast<double>(stream.events.size()) *
                std::min(1.0, 2.0 * cfg.delta / stream.range.width()))));
  for (const auto& ev : stream.events) {
    const double proposal = policy.propose(rng);
    if (std::abs(ev.action - proposal) < cfg.delta) {
      policy.update(proposal, ev.reward);
      trace.append(ev.index, proposal, ev.reward);
    }
  }
  return trace;
}

LoggedStream generate_logged_stream(const RewardModel& model, std::int64_t length, Rng& rng);

/// min(1, 2 delta / width). Exact only for proposals at least delta inside
/// the range; proposals near an edge see a truncated window.
double acceptance_probability(double delta, const ActionRange& range);

/// Log length whose expected accepted count is t_prime:
/// ceil(width * t_prime / (2 delta)).
std::int64_t required_log_length(std::int64_t t_prime, double delta, const ActionRange& range);

class StreamParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `index,action,reward` CSV with 17 significant digits.
void save_stream(const LoggedStream& stream, const std::filesystem::path& path);

/// Reads the CSV written by save_stream (or an external field log in the same
/// format). Actions outside `range` are kept and reported through `warn`.
LoggedStream load_stream(const std::filesystem::path& path, ActionRange range,
                         const std::function<void(const std::string&)>& warn = {});

}  // namespace cabeval

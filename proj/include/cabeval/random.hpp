#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace cabeval {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a hash of a label, used to key seeds by policy name.
std::uint64_t label_hash(std::string_view label);

/// Role tags for seed derivation. Each randomness consumer in an experiment
/// gets its own tag so streams never overlap.
enum class SeedRole : std::uint64_t {
  OnlineModel = 1,
  OfflineModel = 2,
  LoggedStream = 3,
  PolicyInit = 4,
  PolicyPropose = 5,
  OnlineNoise = 6,
};

/// Hierarchical seed derivation: folds each component into the running
/// state with a full mix, so (master, rep, policy, role, ...) determines the
/// seed independently of scheduling or of which other policies exist.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

}  // namespace cabeval

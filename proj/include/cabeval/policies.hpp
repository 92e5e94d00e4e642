#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cabeval/random.hpp"
#include "cabeval/reward_models.hpp"

namespace cabeval {

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Observation {
  double action;
  double reward;
};

/// r = b0 + b1 a + b2 a^2
struct QuadraticCoefficients {
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
};

/// Ordinary least squares fit of the quadratic reward model through the
/// normal equations. Throws PolicyError with fewer than three distinct actions
/// or when the normal matrix condition estimate exceeds 1e12.
QuadraticCoefficients least_squares_quadratic(std::span<const Observation> history);

/// Maximizer of b1 a + b2 a^2 over the range: the vertex when the quadratic
/// is concave and its vertex is interior, otherwise the better endpoint
/// (ties go to lo).
double argmax_quadratic(double b1, double b2, const ActionRange& range);

/// Like argmax_quadratic, but when `unclamped` is set a concave quadratic's
/// vertex is returned even if it lies outside the range.
double quadratic_action(double b1, double b2, const ActionRange& range, bool unclamped);

struct Posterior {
  Eigen::Vector3d mu;
  Eigen::Matrix3d sigma;
};

/// mu + L z with L the lower Cholesky factor of sigma. A 1e-10 diagonal
/// jitter is retried once before giving up.
Eigen::Vector3d sample_mvn(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma, Rng& rng);
Eigen::Vector3d sample_mvn(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma,
                           const Eigen::Vector3d& z);

// ---- parameters -----------------------------------------------------------

struct UniformRandomParams {};

struct EpsilonFirstParams {
  std::int64_t exploration_length = 2000;
  bool unclamped_vertex = false;
};

struct ThompsonParams {
  Eigen::Vector3d prior_j{0.0, 0.05, -0.05};
  Eigen::Vector3d prior_p_diag{2.0, 2.0, 5.0};
  double sigma2 = 1.0;
  bool unclamped_vertex = false;
};

struct LockInParams {
  std::optional<double> a0;  // drawn uniformly on the range when empty
  double amplitude = 0.05;
  std::int64_t window = 50;
  double gamma = 0.1;
  double omega = 1.0;
};

using PolicyParams =
    std::variant<UniformRandomParams, EpsilonFirstParams, ThompsonParams, LockInParams>;

/// A named, fully parameterized policy as it appears in an experiment.
struct PolicySpec {
  std::string label;
  PolicyParams params;
};

std::string policy_kind(const PolicyParams& params);
/// Parameter set as (name, value) pairs for result metadata.
std::vector<std::pair<std::string, std::string>> describe(const PolicyParams& params);

// ---- states ---------------------------------------------------------------

struct URState {};

struct EFState {
  std::int64_t exploration_length = 2000;
  bool unclamped_vertex = false;
  std::vector<Observation> history;
  std::optional<QuadraticCoefficients> fitted;
  std::optional<double> exploit_action;
};

struct TBLState {
  Eigen::Vector3d J;
  Eigen::Matrix3d P;
  double sigma2 = 1.0;
  bool unclamped_vertex = false;
};

struct LiFState {
  double a0 = 0.5;
  double amplitude = 0.05;
  std::int64_t window = 50;
  double gamma = 0.1;
  double omega = 1.0;
  std::int64_t t_local = 0;
  double r_sum = 0.0;
};

/// Sigma = P^-1, mu = Sigma J.
Posterior posterior(const TBLState& state);

/// Action chosen by TBL for a given posterior draw theta = (b0, b1, b2).
double thompson_action(const TBLState& state, const Eigen::Vector3d& theta,
                       const ActionRange& range);

/// One of the four continuous-armed policies behind a propose/update
/// lifecycle. propose() is const; update() is called once per accepted
/// interaction with the action that was proposed.
class PolicyState {
 public:
  using Variant = std::variant<URState, EFState, TBLState, LiFState>;

  static PolicyState uniform_random(ActionRange range);
  static PolicyState epsilon_first(ActionRange range, const EpsilonFirstParams& params);
  static PolicyState thompson(ActionRange range, const ThompsonParams& params);
  /// `init_rng` is consumed only when params.a0 is empty.
  static PolicyState lock_in(ActionRange range, const LockInParams& params, Rng& init_rng);
  static PolicyState from_params(const PolicyParams& params, ActionRange range, Rng& init_rng);

  double propose(Rng& rng) const;
  void update(double action, double reward);

  std::int64_t t() const { return t_; }
  const ActionRange& range() const { return range_; }
  const Variant& state() const { return state_; }
  std::string kind() const;

 private:
  PolicyState(Variant state, ActionRange range) : state_(std::move(state)), range_(range) {}

  Variant state_;
  ActionRange range_;
  std::int64_t t_ = 0;
};

}  // namespace cabeval

#include "cabeval/policies.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cabeval/format.hpp"

namespace cabeval {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Eigen::Vector3d features(double a) { return {1.0, a, a * a}; }

double uniform_action(const ActionRange& range, Rng& rng) {
  return std::uniform_real_distribution<double>(range.lo, range.hi)(rng);
}

// Lower Cholesky factor, with one jittered retry.
Eigen::Matrix3d cholesky_lower(const Eigen::Matrix3d& m, const char* what) {
  Eigen::LLT<Eigen::Matrix3d> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  llt.compute(m + 1e-10 * Eigen::Matrix3d::Identity());
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw PolicyError(std::string(what) + " is not positive definite");
}

}  // namespace

QuadraticCoefficients least_squares_quadratic(std::span<const Observation> history) {
  std::vector<double> actions;
  actions.reserve(history.size());
  for (const auto& o : history) actions.push_back(o.action);
  std::sort(actions.begin(), actions.end());
  const auto distinct = std::unique(actions.begin(), actions.end()) - actions.begin();
  if (distinct < 3) {
    throw PolicyError("quadratic fit needs at least 3 distinct actions, got " +
                      std::to_string(distinct));
  }

  Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
  Eigen::Vector3d xty = Eigen::Vector3d::Zero();
  for (const auto& o : history) {
    const Eigen::Vector3d x = features(o.action);
    xtx.noalias() += x * x.transpose();
    xty += o.reward * x;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(xtx, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12) {
    throw PolicyError("quadratic fit: normal matrix is numerically singular");
  }
  const Eigen::Vector3d beta = xtx.ldlt().solve(xty);
  if (!beta.allFinite()) throw PolicyError("quadratic fit produced non-finite coefficients");
  return {beta[0], beta[1], beta[2]};
}

double argmax_quadratic(double b1, double b2, const ActionRange& range) {
  if (b2 < 0.0) {
    const double vertex = -b1 / (2.0 * b2);
    if (vertex >= range.lo && vertex <= range.hi) return vertex;
  }
  const double at_lo = b1 * range.lo + b2 * range.lo * range.lo;
  const double at_hi = b1 * range.hi + b2 * range.hi * range.hi;
  return at_hi > at_lo ? range.hi : range.lo;
}

double quadratic_action(double b1, double b2, const ActionRange& range, bool unclamped) {
  if (unclamped && b2 < 0.0) return -b1 / (2.0 * b2);
  return argmax_quadratic(b1, b2, range);
}

Eigen::Vector3d sample_mvn(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma,
                           const Eigen::Vector3d& z) {
  return mu + cholesky_lower(sigma, "covariance") * z;
}

Eigen::Vector3d sample_mvn(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d z;
  for (int j = 0; j < 3; ++j) z[j] = normal(rng);
  return sample_mvn(mu, sigma, z);
}

Posterior posterior(const TBLState& state) {
  const Eigen::Matrix3d lower = cholesky_lower(state.P, "precision matrix");
  const Eigen::Matrix3d lower_inv =
      lower.triangularView<Eigen::Lower>().solve(Eigen::Matrix3d::Identity());
  Eigen::Matrix3d sigma = lower_inv.transpose() * lower_inv;
  sigma = 0.5 * (sigma + sigma.transpose());
  Posterior post{sigma * state.J, sigma};
  if (!post.mu.allFinite() || !post.sigma.allFinite()) {
    throw PolicyError("posterior is not finite");
  }
  return post;
}

double thompson_action(const TBLState& state, const Eigen::Vector3d& theta,
                       const ActionRange& range) {
  return quadratic_action(theta[1], theta[2], range, state.unclamped_vertex);
}

// ---- PolicyState ----------------------------------------------------------

PolicyState PolicyState::uniform_random(ActionRange range) { return {URState{}, range}; }

PolicyState PolicyState::epsilon_first(ActionRange range, const EpsilonFirstParams& params) {
  if (params.exploration_length < 1) throw PolicyError("EF exploration length must be >= 1");
  EFState s;
  s.exploration_length = params.exploration_length;
  s.unclamped_vertex = params.unclamped_vertex;
  s.history.reserve(static_cast<std::size_t>(params.exploration_length));
  return {std::move(s), range};
}

PolicyState PolicyState::thompson(ActionRange range, const ThompsonParams& params) {
  if (!(params.sigma2 > 0.0)) throw PolicyError("TBL sigma2 must be positive");
  if (!(params.prior_p_diag.array() > 0.0).all()) {
    throw PolicyError("TBL prior precision diagonal must be positive");
  }
  TBLState s;
  s.J = params.prior_j;
  s.P = params.prior_p_diag.asDiagonal();
  s.sigma2 = params.sigma2;
  s.unclamped_vertex = params.unclamped_vertex;
  return {s, range};
}

PolicyState PolicyState::lock_in(ActionRange range, const LockInParams& params, Rng& init_rng) {
  if (!(params.amplitude > 0.0) || params.window < 1 || !(params.gamma > 0.0) ||
      !(params.omega > 0.0)) {
    throw PolicyError("LiF requires positive amplitude, window, gamma and omega");
  }
  LiFState s;
  s.a0 = params.a0 ? *params.a0 : uniform_action(range, init_rng);
  s.amplitude = params.amplitude;
  s.window = params.window;
  s.gamma = params.gamma;
  s.omega = params.omega;
  return {s, range};
}

PolicyState PolicyState::from_params(const PolicyParams& params, ActionRange range,
                                     Rng& init_rng) {
  return std::visit(
      Overloaded{
          [&](const UniformRandomParams&) { return uniform_random(range); },
          [&](const EpsilonFirstParams& p) { return epsilon_first(range, p); },
          [&](const ThompsonParams& p) { return thompson(range, p); },
          [&](const LockInParams& p) { return lock_in(range, p, init_rng); },
      },
      params);
}

double PolicyState::propose(Rng& rng) const {
  return std::visit(
      Overloaded{
          [&](const URState&) { return uniform_action(range_, rng); },
          [&](const EFState& s) {
            if (s.exploit_action) return *s.exploit_action;
            return uniform_action(range_, rng);
          },
          [&](const TBLState& s) {
            const Posterior post = posterior(s);
            return thompson_action(s, sample_mvn(post.mu, post.sigma, rng), range_);
          },
          [&](const LiFState& s) {
            return s.a0 + s.amplitude * std::cos(s.omega * static_cast<double>(s.t_local + 1));
          },
      },
      state_);
}

void PolicyState::update(double action, double reward) {
  std::visit(Overloaded{
                 [](URState&) {},
                 [&](EFState& s) {
                   if (s.exploit_action) return;
                   s.history.push_back({action, reward});
                   if (static_cast<std::int64_t>(s.history.size()) == s.exploration_length) {
                     s.fitted = least_squares_quadratic(s.history);
                     s.exploit_action =
                         quadratic_action(s.fitted->b1, s.fitted->b2, range_, s.unclamped_vertex);
                   }
                 },
                 [&](TBLState& s) {
                   const Eigen::Vector3d x = features(action);
                   s.J += (reward / s.sigma2) * x;
                   s.P.noalias() += (x * x.transpose()) / s.sigma2;
                 },
                 [&](LiFState& s) {
                   s.t_local += 1;
                   s.r_sum += reward * std::cos(s.omega * static_cast<double>(s.t_local));
                   if (s.t_local % s.window == 0) {
                     s.a0 += s.gamma * (s.r_sum / static_cast<double>(s.window));
                     s.r_sum = 0.0;
                   }
                 },
             },
             state_);
  ++t_;
}

std::string PolicyState::kind() const {
  switch (state_.index()) {
    case 0: return "UR";
    case 1: return "EF";
    case 2: return "TBL";
    default: return "LiF";
  }
}

std::string policy_kind(const PolicyParams& params) {
  switch (params.index()) {
    case 0: return "UR";
    case 1: return "EF";
    case 2: return "TBL";
    default: return "LiF";
  }
}

std::vector<std::pair<std::string, std::string>> describe(const PolicyParams& params) {
  auto vec3 = [](const Eigen::Vector3d& v) {
    return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
  };
  return std::visit(
      Overloaded{
          [](const UniformRandomParams&) { return std::vector<std::pair<std::string, std::string>>{}; },
          [](const EpsilonFirstParams& p) {
            return std::vector<std::pair<std::string, std::string>>{
                {"exploration_length", std::to_string(p.exploration_length)},
                {"unclamped_vertex", p.unclamped_vertex ? "true" : "false"}};
          },
          [&](const ThompsonParams& p) {
            return std::vector<std::pair<std::string, std::string>>{
                {"prior_j", vec3(p.prior_j)},
                {"prior_p_diag", vec3(p.prior_p_diag)},
                {"sigma2", format_double(p.sigma2)},
                {"unclamped_vertex", p.unclamped_vertex ? "true" : "false"}};
          },
          [](const LockInParams& p) {
            return std::vector<std::pair<std::string, std::string>>{
                {"a0", p.a0 ? format_double(*p.a0) : "random"},
                {"amplitude", format_double(p.amplitude)},
                {"window", std::to_string(p.window)},
                {"gamma", format_double(p.gamma)},
                {"omega", format_double(p.omega)}};
          },
      },
      params);
}

}  // namespace cabeval

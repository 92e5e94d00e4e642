#include <doctest.h>

#include <cmath>
#include <vector>

#include "cabeval/policies.hpp"
#include "test_support.hpp"

using namespace cabeval;
using cabeval::testing::Mat3;
using cabeval::testing::Vec3;

namespace {

const ActionRange kUnit(0.0, 1.0);

const TBLState& tbl(const PolicyState& p) { return std::get<TBLState>(p.state()); }
const LiFState& lif(const PolicyState& p) { return std::get<LiFState>(p.state()); }
const EFState& ef(const PolicyState& p) { return std::get<EFState>(p.state()); }

// Brute-force maximizer of b1 a + b2 a^2 on a 1e-4 grid.
double grid_argmax(double b1, double b2, const ActionRange& r) {
  double best_a = r.lo, best_v = -1e300;
  const int n = static_cast<int>(std::round(r.width() / 1e-4));
  for (int j = 0; j <= n; ++j) {
    const double a = r.lo + r.width() * j / n;
    const double v = b1 * a + b2 * a * a;
    if (v > best_v) {
      best_v = v;
      best_a = a;
    }
  }
  return best_a;
}

}  // namespace

TEST_CASE("argmax_quadratic") {
  CHECK(argmax_quadratic(1.0, -1.0, kUnit) == doctest::Approx(0.5));
  CHECK(argmax_quadratic(0.0, 0.5, kUnit) == 1.0);
  CHECK(argmax_quadratic(0.025, -0.01, kUnit) == 1.0);  // vertex 1.25 is outside
  CHECK(argmax_quadratic(0.0, 0.0, kUnit) == 0.0);      // flat: tie goes to lo
  CHECK(argmax_quadratic(-1.0, 0.0, kUnit) == 0.0);

  SUBCASE("agrees with a grid scan on random coefficients") {
    Rng rng(17);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    for (int i = 0; i < 300; ++i) {
      const double b1 = coef(rng), b2 = coef(rng);
      const double a = argmax_quadratic(b1, b2, kUnit);
      REQUIRE(kUnit.contains(a));
      const double g = grid_argmax(b1, b2, kUnit);
      CHECK(b1 * a + b2 * a * a >= b1 * g + b2 * g * g - 1e-7);
    }
  }
  SUBCASE("unclamped mode returns the out-of-range vertex") {
    CHECK(quadratic_action(0.025, -0.01, kUnit, true) == doctest::Approx(1.25));
    CHECK(quadratic_action(0.0, 0.5, kUnit, true) == 1.0);
  }
}

TEST_CASE("least_squares_quadratic") {
  SUBCASE("exact interpolation through three points") {
    std::vector<Observation> h;
    for (double a : {0.0, 0.5, 1.0}) h.push_back({a, 1 + 2 * a - 3 * a * a});
    const auto c = least_squares_quadratic(h);
    CHECK(c.b0 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.b1 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(c.b2 == doctest::Approx(-3.0).epsilon(1e-9));
  }
  SUBCASE("rank deficiency") {
    std::vector<Observation> two{{0.1, 1.0}, {0.2, 2.0}};
    CHECK_THROWS_AS(least_squares_quadratic(two), PolicyError);
    std::vector<Observation> repeated{{0.1, 1.0}, {0.1, 2.0}, {0.2, 0.0}, {0.2, 1.0}};
    CHECK_THROWS_AS(least_squares_quadratic(repeated), PolicyError);
  }
  SUBCASE("matches an explicit normal-equations solve on noisy data") {
    Rng rng(4);
    std::uniform_real_distribution<double> act(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<Observation> h;
    for (int i = 0; i < 1000; ++i) {
      const double a = act(rng);
      h.push_back({a, -(a - 0.3) * (a - 0.3) + noise(rng)});
    }
    Mat3 xtx{};
    Vec3 xty{};
    for (const auto& o : h) {
      const Vec3 x{1.0, o.action, o.action * o.action};
      for (int r = 0; r < 3; ++r) {
        xty[r] += x[r] * o.reward;
        for (int c = 0; c < 3; ++c) xtx[r][c] += x[r] * x[c];
      }
    }
    const Vec3 oracle = cabeval::testing::solve3(xtx, xty);
    const auto c = least_squares_quadratic(h);
    CHECK(std::abs(c.b0 - oracle[0]) < 1e-8);
    CHECK(std::abs(c.b1 - oracle[1]) < 1e-8);
    CHECK(std::abs(c.b2 - oracle[2]) < 1e-8);

    // Interior argmax of the fitted surface is a stationary point.
    const double a = argmax_quadratic(c.b1, c.b2, kUnit);
    REQUIRE(a > 0.0);
    REQUIRE(a < 1.0);
    CHECK(std::abs(c.b1 + 2 * c.b2 * a) < 1e-9);
  }
}

TEST_CASE("TBL posterior and updates") {
  const PolicyState prior = PolicyState::thompson(kUnit, ThompsonParams{});

  SUBCASE("default prior") {
    const Posterior post = posterior(tbl(prior));
    CHECK(post.mu[0] == doctest::Approx(0.0));
    CHECK(post.mu[1] == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(post.mu[2] == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(post.sigma(0, 0) == doctest::Approx(0.5));
    CHECK(post.sigma(1, 1) == doctest::Approx(0.5));
    CHECK(post.sigma(2, 2) == doctest::Approx(0.2));
    CHECK(std::abs(post.sigma(0, 1)) < 1e-15);
  }

  SUBCASE("a zero-noise draw proposes the clamped vertex") {
    const Posterior post = posterior(tbl(prior));
    const Eigen::Vector3d theta = sample_mvn(post.mu, post.sigma, Eigen::Vector3d::Zero());
    CHECK((theta - post.mu).norm() == 0.0);
    const double a = thompson_action(tbl(prior), theta, kUnit);
    CHECK(a == 1.0);
    CHECK(a == doctest::Approx(grid_argmax(theta[1], theta[2], kUnit)));
  }

  SUBCASE("one update at action 0") {
    PolicyState p = prior;
    p.update(0.0, 1.0);
    CHECK(p.t() == 1);
    const auto& s = tbl(p);
    CHECK(s.J[0] == 1.0);
    CHECK(s.J[1] == 0.05);
    CHECK(s.J[2] == -0.05);
    CHECK(s.P(0, 0) == 3.0);
    CHECK(s.P(1, 1) == 2.0);
    CHECK(s.P(2, 2) == 5.0);
    CHECK(s.P(0, 1) == 0.0);
    CHECK(s.P(1, 2) == 0.0);
  }

  SUBCASE("sequential updates equal the batch posterior") {
    Rng rng(8);
    std::uniform_real_distribution<double> act(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.1);
    ThompsonParams params;
    params.sigma2 = 0.5;
    for (int dataset = 0; dataset < 20; ++dataset) {
      PolicyState p = PolicyState::thompson(kUnit, params);
      Mat3 prec{};
      Vec3 info{0.0, 0.05, -0.05};
      prec[0][0] = 2;
      prec[1][1] = 2;
      prec[2][2] = 5;
      for (int i = 0; i < 50; ++i) {
        const double a = act(rng);
        const double r = 0.2 + a - a * a + noise(rng);
        p.update(a, r);
        const Vec3 x{1, a, a * a};
        for (int u = 0; u < 3; ++u) {
          info[u] += r * x[u] / params.sigma2;
          for (int v = 0; v < 3; ++v) prec[u][v] += x[u] * x[v] / params.sigma2;
        }
      }
      const Mat3 cov = cabeval::testing::inverse3(prec);
      const Vec3 mu = cabeval::testing::solve3(prec, info);
      const Posterior post = posterior(tbl(p));
      for (int u = 0; u < 3; ++u) {
        CHECK(std::abs(post.mu[u] - mu[u]) < 1e-10);
        for (int v = 0; v < 3; ++v) CHECK(std::abs(post.sigma(u, v) - cov[u][v]) < 1e-10);
      }
    }
  }

  SUBCASE("precision never decreases along any direction") {
    Rng rng(12);
    std::uniform_real_distribution<double> act(-0.5, 1.5);
    PolicyState p = prior;
    std::vector<Eigen::Vector3d> dirs;
    for (int i = 0; i < 20; ++i) dirs.push_back(Eigen::Vector3d::Random());
    std::vector<double> last(dirs.size());
    for (std::size_t i = 0; i < dirs.size(); ++i) last[i] = dirs[i].dot(tbl(p).P * dirs[i]);
    for (int step = 0; step < 200; ++step) {
      p.update(act(rng), act(rng));
      for (std::size_t i = 0; i < dirs.size(); ++i) {
        const double q = dirs[i].dot(tbl(p).P * dirs[i]);
        CHECK(q >= last[i]);
        last[i] = q;
      }
    }
  }

  SUBCASE("non positive definite precision fails factorization") {
    TBLState s = tbl(prior);
    s.P(2, 2) = -1.0;
    CHECK_THROWS_AS(posterior(s), PolicyError);
  }
}

TEST_CASE("sample_mvn moments") {
  const Eigen::Vector3d mu(0.5, -1.0, 2.0);
  Eigen::Matrix3d sigma;
  sigma << 0.5, 0.1, 0.0,  //
      0.1, 0.3, -0.05,     //
      0.0, -0.05, 0.2;
  Rng rng(31);
  constexpr int n = 50000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    draws.push_back(sample_mvn(mu, sigma, rng));
    sum += draws.back();
  }
  const Eigen::Vector3d mean = sum / n;
  for (int j = 0; j < 3; ++j) CHECK(std::abs(mean[j] - mu[j]) < 5 * std::sqrt(sigma(j, j) / n));
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& d : draws) cov += (d - mean) * (d - mean).transpose();
  cov /= (n - 1);
  CHECK((cov - sigma).norm() / sigma.norm() < 0.05);

  Eigen::Matrix3d bad = sigma;
  bad(0, 0) = -1;
  CHECK_THROWS_AS(sample_mvn(mu, bad, rng), PolicyError);
}

TEST_CASE("LiF proposals and windows") {
  LockInParams params;
  params.a0 = 0.5;
  params.amplitude = 0.05;
  params.omega = 1.0;
  params.window = 50;
  params.gamma = 0.1;
  Rng unused(0);
  PolicyState p = PolicyState::lock_in(kUnit, params, unused);
  Rng rng(1);
  CHECK(p.propose(rng) == doctest::Approx(0.5 + 0.05 * std::cos(1.0)));
  CHECK(p.propose(rng) == doctest::Approx(0.52702).epsilon(1e-5));

  SUBCASE("center is fixed within a window") {
    for (int t = 0; t < 49; ++t) p.update(p.propose(rng), 1.0);
    CHECK(lif(p).a0 == 0.5);
    CHECK(lif(p).r_sum != 0.0);
  }

  SUBCASE("one window on constant reward") {
    const double c = 0.7;
    double cos_sum = 0;  // brute-force oracle
    for (int t = 1; t <= 50; ++t) cos_sum += std::cos(static_cast<double>(t));
    for (int t = 0; t < 50; ++t) p.update(p.propose(rng), c);
    CHECK(lif(p).a0 == doctest::Approx(0.5 + 0.1 * (c / 50) * cos_sum).epsilon(1e-14));
    CHECK(lif(p).r_sum == 0.0);
    CHECK(lif(p).t_local == 50);
  }

  SUBCASE("phase continues across windows") {
    for (int t = 0; t < 50; ++t) p.update(p.propose(rng), 0.0);
    CHECK(p.propose(rng) == doctest::Approx(lif(p).a0 + 0.05 * std::cos(51.0)));
  }

  SUBCASE("proposals are not clamped") {
    params.a0 = 0.99;
    PolicyState edge = PolicyState::lock_in(kUnit, params, unused);
    bool outside = false;
    for (int t = 0; t < 10; ++t) {
      outside |= edge.propose(rng) > 1.0;
      edge.update(edge.propose(rng), 0.0);
    }
    CHECK(outside);
  }

  SUBCASE("random start draws from the range") {
    LockInParams random_start;
    Rng init(3);
    const PolicyState r = PolicyState::lock_in(kUnit, random_start, init);
    CHECK(kUnit.contains(lif(r).a0));
  }
}

TEST_CASE("EF phases") {
  EpsilonFirstParams params;
  params.exploration_length = 100;
  PolicyState p = PolicyState::epsilon_first(kUnit, params);
  Rng rng(21);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int t = 0; t < 99; ++t) {
    const double a = p.propose(rng);
    CHECK(kUnit.contains(a));
    p.update(a, -(a - 0.3) * (a - 0.3) + noise(rng));
    CHECK_FALSE(ef(p).fitted.has_value());
  }
  const double a = p.propose(rng);
  p.update(a, -(a - 0.3) * (a - 0.3));
  REQUIRE(ef(p).fitted.has_value());
  REQUIRE(ef(p).exploit_action.has_value());
  const double frozen = *ef(p).exploit_action;
  CHECK(std::abs(frozen - 0.3) < 0.1);
  for (int t = 0; t < 50; ++t) {
    CHECK(p.propose(rng) == frozen);
    p.update(frozen, 100.0);  // later rewards cannot move it
  }
  CHECK(*ef(p).exploit_action == frozen);
  CHECK(p.t() == 150);

  SUBCASE("degenerate exploration length fails at the transition") {
    EpsilonFirstParams tiny;
    tiny.exploration_length = 2;
    PolicyState q = PolicyState::epsilon_first(kUnit, tiny);
    q.update(0.1, 0.0);
    CHECK_THROWS_AS(q.update(0.2, 0.0), PolicyError);
  }
}

TEST_CASE("propose does not mutate and same inputs give same proposals") {
  const std::vector<PolicyParams> all{UniformRandomParams{}, EpsilonFirstParams{20, false},
                                      ThompsonParams{}, LockInParams{}};
  for (const auto& params : all) {
    Rng init_a(5), init_b(5);
    PolicyState a = PolicyState::from_params(params, kUnit, init_a);
    PolicyState b = PolicyState::from_params(params, kUnit, init_b);
    Rng ra(9), rb(9), rewards(1);
    std::uniform_real_distribution<double> r(-1, 0);
    for (int t = 0; t < 200; ++t) {
      const double pa = a.propose(ra);
      const double pb = b.propose(rb);
      REQUIRE(pa == pb);
      const double reward = r(rewards);
      a.update(pa, reward);
      b.update(pb, reward);
    }
    CHECK(a.t() == 200);
    CHECK(a.kind() == policy_kind(params));
  }
}

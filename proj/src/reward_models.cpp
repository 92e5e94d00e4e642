#include "cabeval/reward_models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cabeval {

ActionRange::ActionRange(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ModelError("action range requires finite lo < hi");
  }
}

double ParabolaModel::mean(double a) const {
  const double d = a - peak;
  return -scale * d * d;
}

double ParabolaModel::derivative(double a) const { return -2.0 * scale * (a - peak); }

namespace {

double raw_antiderivative(double x, double m1, double m0, double m2) {
  // (x - m1)(x - m0)(x - m2) = x^3 - s1 x^2 + s2 x - s3
  const double s1 = m1 + m0 + m2;
  const double s2 = m1 * m0 + m1 * m2 + m0 * m2;
  const double s3 = m1 * m0 * m2;
  const double x2 = x * x;
  return x2 * x2 / 4.0 - s1 * x2 * x / 3.0 + s2 * x2 / 2.0 - s3 * x;
}

}  // namespace

double BimodalQuarticModel::antiderivative(double x) const {
  return raw_antiderivative(x, m1, m0, m2) - raw_antiderivative(range.lo, m1, m0, m2);
}

double BimodalQuarticModel::mean(double a) const { return k * antiderivative(a) + c; }

double BimodalQuarticModel::derivative(double a) const {
  return k * (a - m1) * (a - m0) * (a - m2);
}

double BimodalQuarticModel::second_derivative(double a) const {
  const double s1 = m1 + m0 + m2;
  const double s2 = m1 * m0 + m1 * m2 + m0 * m2;
  return k * (3.0 * a * a - 2.0 * s1 * a + s2);
}

BimodalQuarticModel BimodalQuarticModel::from_heights(double m1, double m0, double m2, double h1,
                                                      double h2, double noise_var,
                                                      ActionRange range) {
  BimodalQuarticModel m;
  m.m1 = m1;
  m.m0 = m0;
  m.m2 = m2;
  m.noise_var = noise_var;
  m.range = range;
  const double q1 = m.antiderivative(m1);
  const double q2 = m.antiderivative(m2);
  if (std::abs(q1 - q2) < 1e-12) {
    throw ModelError("degenerate bimodal geometry: Q(m1) == Q(m2)");
  }
  m.k = (h1 - h2) / (q1 - q2);
  m.c = h1 - m.k * q1;
  return m;
}

BimodalQuarticModel BimodalQuarticModel::normalized(double m1, double m0, double m2,
                                                    double peak_height, double noise_var,
                                                    ActionRange range) {
  if (!(peak_height > 0.0)) throw ModelError("bimodal peak height must be positive");
  BimodalQuarticModel m;
  m.m1 = m1;
  m.m0 = m0;
  m.m2 = m2;
  m.noise_var = noise_var;
  m.range = range;
  // With k = -1 the stationary points give the extremes inside the range;
  // the only other candidates are the endpoints.
  const auto shape = [&m](double x) { return -m.antiderivative(x); };
  const double top = std::max(shape(m1), shape(m2));
  const double bottom = std::min({shape(range.lo), shape(range.hi), shape(m0)});
  const double span = top - bottom;
  if (!(span > 1e-12)) throw ModelError("degenerate bimodal geometry: flat shape");
  m.k = -peak_height / span;
  m.c = peak_height * bottom / span;
  return m;
}

bool BimodalQuarticModel::is_bimodal() const {
  return range.lo < m1 && m1 < m0 && m0 < m2 && m2 < range.hi && second_derivative(m1) < 0.0 &&
         second_derivative(m2) < 0.0 && second_derivative(m0) > 0.0;
}

namespace {

Optimum compute_optimum(const ParabolaModel& m) { return {m.peak, m.mean(m.peak)}; }

Optimum compute_optimum(const BimodalQuarticModel& m) {
  const double v1 = m.mean(m.m1);
  const double v2 = m.mean(m.m2);
  Optimum best = v1 >= v2 ? Optimum{m.m1, v1} : Optimum{m.m2, v2};
  // The analytic maxima are exact; the grid only catches a construction that
  // slipped past is_bimodal().
  const double step = m.range.width() / (kOptimumGridPoints - 1);
  for (int j = 0; j < kOptimumGridPoints; ++j) {
    const double a = m.range.lo + j * step;
    const double v = m.mean(a);
    if (v > best.r_star + 1e-12) best = {a, v};
  }
  return best;
}

}  // namespace

RewardModel::RewardModel(ParabolaModel m) : model_(m), optimum_(compute_optimum(m)) {}

RewardModel::RewardModel(BimodalQuarticModel m) : model_(m), optimum_(compute_optimum(m)) {}

double RewardModel::mean(double a) const {
  return std::visit([a](const auto& m) { return m.mean(a); }, model_);
}

double RewardModel::derivative(double a) const {
  return std::visit([a](const auto& m) { return m.derivative(a); }, model_);
}

double RewardModel::sample(double a, Rng& rng) const {
  const double mu = mean(a);
  const double var = noise_var();
  if (var <= 0.0) return mu;
  std::normal_distribution<double> noise(0.0, std::sqrt(var));
  return mu + noise(rng);
}

const ActionRange& RewardModel::range() const {
  return std::visit([](const auto& m) -> const ActionRange& { return m.range; }, model_);
}

double RewardModel::noise_var() const {
  return std::visit([](const auto& m) { return m.noise_var; }, model_);
}

std::string RewardModel::family() const {
  return std::holds_alternative<ParabolaModel>(model_) ? "parabola" : "bimodal";
}

std::vector<std::pair<std::string, double>> RewardModel::parameters() const {
  if (const auto* p = std::get_if<ParabolaModel>(&model_)) {
    return {{"peak", p->peak},     {"scale", p->scale},       {"noise_var", p->noise_var},
            {"lo", p->range.lo},   {"hi", p->range.hi}};
  }
  const auto& b = std::get<BimodalQuarticModel>(model_);
  return {{"m1", b.m1}, {"m0", b.m0}, {"m2", b.m2},           {"k", b.k},
          {"c", b.c},   {"noise_var", b.noise_var}, {"lo", b.range.lo}, {"hi", b.range.hi}};
}

ParabolaModel make_parabola(Rng& rng, ActionRange range, double noise_var, double scale) {
  if (!(scale > 0.0)) throw ModelError("parabola scale must be positive");
  if (!(noise_var >= 0.0)) throw ModelError("noise variance must be non-negative");
  std::uniform_real_distribution<double> peak(range.lo, range.hi);
  ParabolaModel m;
  m.peak = peak(rng);
  m.scale = scale;
  m.noise_var = noise_var;
  m.range = range;
  return m;
}

BimodalQuarticModel make_bimodal(Rng& rng, ActionRange range, double noise_var) {
  if (!(noise_var >= 0.0)) throw ModelError("noise variance must be non-negative");
  const double lo = range.lo, hi = range.hi, w = range.width();
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const double m1 = std::uniform_real_distribution<double>(lo + 0.05, lo + 0.45 * w)(rng);
    const double m2 = std::uniform_real_distribution<double>(lo + 0.55 * w, hi - 0.05)(rng);
    const double m0 = std::uniform_real_distribution<double>(m1 + 0.05, m2 - 0.05)(rng);
    const double height = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
    try {
      auto m = BimodalQuarticModel::normalized(m1, m0, m2, height, noise_var, range);
      if (m.is_bimodal()) return m;
    } catch (const ModelError&) {
      continue;
    }
  }
  throw ModelError("bimodal construction exhausted 100 resample attempts");
}

double mean_reward(const RewardModel& model, double a) { return model.mean(a); }

double sample_reward(const RewardModel& model, double a, Rng& rng) { return model.sample(a, rng); }

Optimum optimum(const RewardModel& model) { return model.optimum(); }

}  // namespace cabeval

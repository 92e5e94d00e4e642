#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cabeval/random.hpp"

namespace cabeval {

/// Closed action interval [lo, hi].
struct ActionRange {
  double lo = 0.0;
  double hi = 1.0;

  ActionRange() = default;
  ActionRange(double lo_, double hi_);

  double width() const { return hi - lo; }
  bool contains(double a) const { return a >= lo && a <= hi; }
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// mean(a) = -scale * (a - peak)^2
struct ParabolaModel {
  double peak = 0.5;
  double scale = 1.0;
  double noise_var = 0.01;
  ActionRange range;

  double mean(double a) const;
  double derivative(double a) const;
};

/// Quartic whose derivative is k (x - m1)(x - m0)(x - m2). With k < 0 the
/// outer stationary points m1 < m2 are maxima and m0 is the valley between.
struct BimodalQuarticModel {
  double m1 = 0.25, m0 = 0.5, m2 = 0.75;
  double k = -1.0;
  double c = 0.0;
  double noise_var = 0.01;
  ActionRange range;

  /// Antiderivative of (x - m1)(x - m0)(x - m2), anchored so Q(lo) = 0.
  double antiderivative(double x) const;
  double mean(double a) const;
  double derivative(double a) const;
  double second_derivative(double a) const;

  /// Solves k and c so that mean(m1) = h1 and mean(m2) = h2. Throws
  /// ModelError when Q(m1) and Q(m2) coincide (singular system).
  static BimodalQuarticModel from_heights(double m1, double m0, double m2, double h1, double h2,
                                          double noise_var, ActionRange range);

  /// Scales the shape so that, over the range, the lowest mean is 0 and the
  /// global maximum equals `peak_height`.
  static BimodalQuarticModel normalized(double m1, double m0, double m2, double peak_height,
                                        double noise_var, ActionRange range);

  /// True when m1, m2 are maxima, m0 is a minimum and the ordering holds.
  bool is_bimodal() const;
};

struct Optimum {
  double a_star;
  double r_star;
};

/// A ground-truth reward function. Immutable once built; safe to share
/// across threads.
class RewardModel {
 public:
  RewardModel(ParabolaModel m);  // NOLINT(google-explicit-constructor)
  RewardModel(BimodalQuarticModel m);  // NOLINT(google-explicit-constructor)

  double mean(double a) const;
  double derivative(double a) const;
  double sample(double a, Rng& rng) const;
  const Optimum& optimum() const { return optimum_; }
  const ActionRange& range() const;
  double noise_var() const;

  std::string family() const;
  /// Family parameters in a fixed order, for result metadata.
  std::vector<std::pair<std::string, double>> parameters() const;

  const std::variant<ParabolaModel, BimodalQuarticModel>& variant() const { return model_; }

 private:
  std::variant<ParabolaModel, BimodalQuarticModel> model_;
  Optimum optimum_;
};

ParabolaModel make_parabola(Rng& rng, ActionRange range, double noise_var, double scale = 1.0);

/// Draws stationary points m1 < m0 < m2 and a peak height in [0.5, 1], then
/// normalizes the quartic so it spans [0, height] over the range. Throws
/// ModelError after 100 failed attempts.
BimodalQuarticModel make_bimodal(Rng& rng, ActionRange range, double noise_var);

double mean_reward(const RewardModel& model, double a);
double sample_reward(const RewardModel& model, double a, Rng& rng);
Optimum optimum(const RewardModel& model);

/// Grid size used when refining and checking optima.
inline constexpr int kOptimumGridPoints = 10001;

}  // namespace cabeval

#pragma once

#include <array>
#include <map>
#include <span>
#include <vector>

#include "crowdsched/features.hpp"
#include "crowdsched/mlp.hpp"
#include "crowdsched/task_model.hpp"

namespace crowdsched {

/// Predicts a task from the daily mean labels of the `window` calendar days
/// before its day. Days without tasks are skipped; with no labelled day in
/// the window the fallback is used.
class MovingAverage {
 public:
  MovingAverage(std::span<const Day> days, std::span<const double> labels, std::size_t window);

  double predict(Day day, double fallback) const;

 private:
  std::map<Day, std::pair<double, std::size_t>> daily_;  // day -> (label sum, count)
  std::size_t window_;
};

/// Walk-forward moving average over a labelled series. Tasks within the first
/// `window` days of the series get the running mean of all earlier tasks; a
/// task with no earlier history gets `prior`. Output is parallel to the input.
std::vector<double> moving_average_series(std::span<const Day> days, std::span<const double> labels,
                                          std::size_t window, double prior = 0.5);

/// Least squares on z-scored features with an intercept, solved through the
/// normal equations. A rank-deficient design gets a small ridge term.
class LinearRegression {
 public:
  static LinearRegression fit(std::span<const FeatureVector> features, std::span<const double> labels,
                              double ridge = 1e-8);

  /// Clamped to [0,1].
  double predict(const FeatureVector& x) const;
  double predict_unclamped(const FeatureVector& x) const;

  /// Intercept first, then one slope per normalized feature.
  const std::array<double, kFeatureCount + 1>& coefficients() const { return beta_; }
  const NormStats& norm_stats() const { return norm_; }
  bool ridge_applied() const { return ridge_applied_; }

 private:
  std::array<double, kFeatureCount + 1> beta_{};
  NormStats norm_;
  bool ridge_applied_ = false;
};

class ConstantMean {
 public:
  static ConstantMean fit(std::span<const double> labels);
  double predict() const { return mean_; }

 private:
  double mean_ = 0.0;
};

}  // namespace crowdsched

#include "crowdsched/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace crowdsched {

MovingAverage::MovingAverage(std::span<const Day> days, std::span<const double> labels, std::size_t window)
    : window_(window) {
  if (window == 0) throw std::invalid_argument("moving-average window must be >= 1");
  if (days.size() != labels.size()) throw std::invalid_argument("days and labels differ in length");
  for (std::size_t i = 0; i < days.size(); ++i) {
    auto& slot = daily_[days[i]];
    slot.first += labels[i];
    slot.second += 1;
  }
}

double MovingAverage::predict(Day day, double fallback) const {
  const Day first = day - static_cast<Day>(window_);
  double sum = 0.0;
  std::size_t used = 0;
  for (auto it = daily_.lower_bound(first); it != daily_.end() && it->first < day; ++it) {
    sum += it->second.first / static_cast<double>(it->second.second);
    ++used;
  }
  return used == 0 ? fallback : sum / static_cast<double>(used);
}

std::vector<double> moving_average_series(std::span<const Day> days, std::span<const double> labels,
                                          std::size_t window, double prior) {
  if (window == 0) throw std::invalid_argument("moving-average window must be >= 1");
  if (days.size() != labels.size()) throw std::invalid_argument("days and labels differ in length");
  std::vector<double> out(days.size(), prior);
  if (days.empty()) return out;

  std::vector<std::size_t> order(days.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return days[a] < days[b]; });
  const Day start = days[order.front()];

  std::map<Day, std::pair<double, std::size_t>> daily;
  double prefix_sum = 0.0;
  std::size_t prefix_count = 0;
  for (std::size_t i = 0; i < order.size();) {
    const Day day = days[order[i]];
    std::size_t j = i;
    while (j < order.size() && days[order[j]] == day) ++j;

    double prediction = prior;
    if (prefix_count > 0) {
      prediction = prefix_sum / static_cast<double>(prefix_count);
      if (day - start >= static_cast<Day>(window)) {
        double sum = 0.0;
        std::size_t used = 0;
        for (auto it = daily.lower_bound(day - static_cast<Day>(window)); it != daily.end(); ++it) {
          sum += it->second.first / static_cast<double>(it->second.second);
          ++used;
        }
        if (used > 0) prediction = sum / static_cast<double>(used);
      }
    }
    for (std::size_t k = i; k < j; ++k) {
      out[order[k]] = prediction;
      auto& slot = daily[day];
      slot.first += labels[order[k]];
      slot.second += 1;
      prefix_sum += labels[order[k]];
      ++prefix_count;
    }
    i = j;
  }
  return out;
}

LinearRegression LinearRegression::fit(std::span<const FeatureVector> features, std::span<const double> labels,
                                       double ridge) {
  constexpr std::size_t kMinRows = 5;
  if (features.size() != labels.size()) throw std::invalid_argument("features and labels differ in length");
  if (features.size() < kMinRows) throw std::invalid_argument("linear regression needs at least 5 rows");

  LinearRegression model;
  model.norm_ = NormStats::fit(features);
  constexpr int p = static_cast<int>(kFeatureCount) + 1;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), p);
  Eigen::VectorXd y(static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto z = model.norm_.apply(features[i]);
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = 1.0;
    for (std::size_t k = 0; k < kFeatureCount; ++k) x(row, static_cast<Eigen::Index>(k + 1)) = z[k];
    y(row) = labels[i];
  }
  Eigen::MatrixXd gram = x.transpose() * x;
  const Eigen::VectorXd rhs = x.transpose() * y;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(1e-12);
  if (qr.rank() < p) {
    model.ridge_applied_ = true;
    const double lambda = ridge * static_cast<double>(features.size());
    for (int k = 1; k < p; ++k) gram(k, k) += lambda;
  }
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  for (int k = 0; k < p; ++k) model.beta_[static_cast<std::size_t>(k)] = beta(k);
  return model;
}

double LinearRegression::predict_unclamped(const FeatureVector& x) const {
  const auto z = norm_.apply(x);
  double y = beta_[0];
  for (std::size_t k = 0; k < kFeatureCount; ++k) y += beta_[k + 1] * z[k];
  return y;
}

double LinearRegression::predict(const FeatureVector& x) const {
  return std::clamp(predict_unclamped(x), 0.0, 1.0);
}

ConstantMean ConstantMean::fit(std::span<const double> labels) {
  if (labels.empty()) throw std::invalid_argument("constant-mean predictor needs at least one label");
  ConstantMean model;
  model.mean_ = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
  return model;
}

}  // namespace crowdsched

#pragma once

#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace crowdsched {

inline const std::vector<double> kDefaultPredThresholds = {0.01, 0.05, 0.10, 0.25};

struct MetricReport {
  std::size_t count = 0;
  double mse = 0.0;
  double md_mse = 0.0;   // median squared error
  double std_mse = 0.0;  // population standard deviation of squared errors
  std::vector<std::pair<double, double>> pred_n;  // (threshold, fraction with squared error <= threshold)
  double accuracy = 0.0;  // predictions and actuals thresholded at 0.5

  /// Pred(N) for a threshold present in the report.
  double pred(double threshold) const;
};

/// Squared-error summary of paired predictions. Throws std::invalid_argument
/// for empty or mismatched input or non-finite values.
MetricReport compute_metrics(std::span<const double> predicted, std::span<const double> actual,
                             std::span<const double> thresholds = kDefaultPredThresholds);

/// Median, averaging the middle pair for even sizes.
double median(std::vector<double> values);

nlohmann::json to_json(const MetricReport& report);

}  // namespace crowdsched

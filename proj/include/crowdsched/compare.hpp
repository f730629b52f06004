#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "crowdsched/features.hpp"
#include "crowdsched/metrics.hpp"
#include "crowdsched/training.hpp"

namespace crowdsched {

struct EvalConfig {
  std::size_t moving_average_window = 7;
  std::vector<double> pred_thresholds = kDefaultPredThresholds;
  double primary_threshold = 0.05;

  void validate() const;
};

struct PredictorResult {
  std::string name;
  MetricReport metrics;
};

struct ComparisonReport {
  std::size_t k = 0;
  std::size_t group_size = 0;
  std::size_t holdout_size = 0;
  double primary_threshold = 0.05;
  /// neural_network, linear_regression, moving_average, constant_mean; each
  /// scored on the pooled out-of-fold predictions over the cross-validation group.
  std::vector<PredictorResult> predictors;
  /// Constant-mean predictor fitted and scored on the holdout split, next to
  /// the population variance of the holdout labels.
  double holdout_constant_mse = 0.0;
  double holdout_label_variance = 0.0;

  const PredictorResult& find(const std::string& name) const;
};

/// Runs every predictor through the same holdout split and K folds as kfold_cv.
ComparisonReport compare_predictors(const LabeledSet& data, const TrainConfig& train_config,
                                    const EvalConfig& eval_config = {});

nlohmann::json to_json(const ComparisonReport& report);
/// One row per predictor: name, mse, md_mse, std_mse, one pred column per threshold, accuracy.
std::string comparison_table_csv(const ComparisonReport& report);

}  // namespace crowdsched

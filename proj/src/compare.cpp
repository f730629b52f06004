#include "crowdsched/compare.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "crowdsched/baselines.hpp"

namespace crowdsched {

namespace {

std::vector<double> gather(const std::vector<double>& values, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(values[r]);
  return out;
}

}  // namespace

void EvalConfig::validate() const {
  if (moving_average_window == 0) throw std::invalid_argument("eval.moving_average_window must be >= 1");
  if (pred_thresholds.empty()) throw std::invalid_argument("eval.pred_thresholds must not be empty");
  for (double t : pred_thresholds) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("eval.pred_thresholds must be finite and >= 0");
  }
  if (std::find(pred_thresholds.begin(), pred_thresholds.end(), primary_threshold) == pred_thresholds.end()) {
    throw std::invalid_argument("eval.primary_threshold must be one of eval.pred_thresholds");
  }
}

const PredictorResult& ComparisonReport::find(const std::string& name) const {
  for (const auto& p : predictors) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no predictor named '" + name + "'");
}

ComparisonReport compare_predictors(const LabeledSet& data, const TrainConfig& train_config,
                                    const EvalConfig& eval_config) {
  train_config.validate();
  eval_config.validate();
  const auto split = holdout_split(data, train_config.holdout_fraction, train_config.seed);
  const auto folds = kfold_assign(split.group, train_config.kfold_k, train_config.seed);

  const std::size_t n = data.size();
  std::vector<double> network(n), linear(n), moving(n), constant(n);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    const LabeledSet training = data.subset(fold.train);

    TrainConfig fold_config = train_config;
    fold_config.seed = fold_seed(train_config.seed, f);
    const auto net = train(training, fold_config).model;
    const auto lr = LinearRegression::fit(training.features, training.labels);
    const auto mean = ConstantMean::fit(training.labels);
    const MovingAverage ma(training.days, training.labels, eval_config.moving_average_window);

    for (auto r : fold.test) {
      network[r] = net.forward(data.features[r]);
      linear[r] = lr.predict(data.features[r]);
      moving[r] = ma.predict(data.days[r], mean.predict());
      constant[r] = mean.predict();
    }
  }

  std::vector<std::size_t> pooled;
  for (const auto& fold : folds) pooled.insert(pooled.end(), fold.test.begin(), fold.test.end());
  const auto actual = gather(data.labels, pooled);

  ComparisonReport report;
  report.k = train_config.kfold_k;
  report.group_size = split.group.size();
  report.holdout_size = split.holdout.size();
  report.primary_threshold = eval_config.primary_threshold;
  auto add = [&](const char* name, const std::vector<double>& predictions) {
    report.predictors.push_back({name, compute_metrics(gather(predictions, pooled), actual, eval_config.pred_thresholds)});
  };
  add("neural_network", network);
  add("linear_regression", linear);
  add("moving_average", moving);
  add("constant_mean", constant);

  const auto holdout_labels = gather(data.labels, split.holdout);
  const double holdout_mean = ConstantMean::fit(holdout_labels).predict();
  const std::vector<double> flat(holdout_labels.size(), holdout_mean);
  report.holdout_constant_mse = compute_metrics(flat, holdout_labels, eval_config.pred_thresholds).mse;
  double var = 0.0;
  for (double y : holdout_labels) var += (y - holdout_mean) * (y - holdout_mean);
  report.holdout_label_variance = var / static_cast<double>(holdout_labels.size());
  return report;
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json predictors = nlohmann::json::array();
  for (const auto& p : report.predictors) {
    auto entry = to_json(p.metrics);
    entry["name"] = p.name;
    entry["pred_primary"] = p.metrics.pred(report.primary_threshold);
    predictors.push_back(entry);
  }
  return {
      {"k", report.k},
      {"group_size", report.group_size},
      {"holdout_size", report.holdout_size},
      {"primary_threshold", report.primary_threshold},
      {"predictors", predictors},
      {"holdout_constant_mse", report.holdout_constant_mse},
      {"holdout_label_variance", report.holdout_label_variance},
  };
}

std::string comparison_table_csv(const ComparisonReport& report) {
  std::string out = "predictor,mse,md_mse,std_mse";
  if (!report.predictors.empty()) {
    for (const auto& [t, _] : report.predictors.front().metrics.pred_n) out += ",pred_" + format_double(t);
  }
  out += ",accuracy\n";
  for (const auto& p : report.predictors) {
    out += p.name + ',' + format_double(p.metrics.mse) + ',' + format_double(p.metrics.md_mse) + ',' +
           format_double(p.metrics.std_mse);
    for (const auto& [_, v] : p.metrics.pred_n) out += ',' + format_double(v);
    out += ',' + format_double(p.metrics.accuracy) + '\n';
  }
  return out;
}

}  // namespace crowdsched

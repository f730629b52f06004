#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "crowdsched/features.hpp"
#include "crowdsched/mlp.hpp"

namespace crowdsched {

struct TrainConfig {
  std::vector<std::size_t> layer_dims = kDefaultLayerDims;
  Activation hidden_activation = Activation::relu;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;            // epochs without validation improvement
  double learning_rate = 0.01;
  double momentum = 0.0;  // plain SGD by default
  double validation_fraction = 0.1;    // early-stopping slice of each training portion
  double holdout_fraction = 0.2;
  std::size_t kfold_k = 10;
  TrainingTarget target = TrainingTarget::task_label;
  std::size_t init_draws = 3;         // initializations tried; best validation loss wins
  std::uint64_t seed = 42;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, const std::string& message) : std::runtime_error(message), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  bool stopped_early = false;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t draw = 0;  // which initialization won
};

/// Mini-batch gradient descent on squared error. Rows are put in task_id
/// order before the seeded shuffle, so results do not depend on input order.
/// Normalization statistics come from the gradient rows only; the returned
/// model holds the weights of the best validation epoch.
TrainResult train(const LabeledSet& data, const TrainConfig& config);

/// Row indices of `data` in canonical (task_id) order.
std::vector<std::size_t> canonical_order(const LabeledSet& data);

/// Both parts list row indices in canonical order.
struct HoldoutSplit {
  std::vector<std::size_t> group;    // train/test group used for cross-validation
  std::vector<std::size_t> holdout;  // never touched by cross-validation
};

HoldoutSplit holdout_split(const LabeledSet& data, double holdout_fraction, std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// K folds over a seeded shuffle of `group`; sizes differ by at most one.
/// Assignment depends only on the order of `group`, k and the seed.
std::vector<Fold> kfold_assign(std::span<const std::size_t> group, std::size_t k, std::uint64_t seed);

struct FoldResult {
  double loss = 0.0;  // squared error on the fold's test rows
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t best_epoch = 0;
};

struct CvReport {
  std::size_t k = 0;
  std::vector<FoldResult> folds;
  double mean_loss = 0.0;
  double stddev_loss = 0.0;  // sample standard deviation across folds
  std::size_t group_size = 0;
  std::size_t holdout_size = 0;
  std::optional<double> holdout_loss;  // model trained on the whole group, scored on the holdout
};

/// Training seed of fold `fold`, derived from the master seed.
std::uint64_t fold_seed(std::uint64_t master, std::size_t fold);

/// Holdout split, then K-fold cross-validation on the remaining group.
CvReport kfold_cv(const LabeledSet& data, const TrainConfig& config, bool score_holdout = false);

/// Mean squared error of `model` over the given rows.
double evaluate_mse(const MlpModel& model, const LabeledSet& data, std::span<const std::size_t> rows);

nlohmann::json to_json(const CvReport& report);
nlohmann::json to_json(const TrainResult& result);

}  // namespace crowdsched

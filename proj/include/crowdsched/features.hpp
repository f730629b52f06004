#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsched/platform_state.hpp"
#include "crowdsched/task_model.hpp"

namespace crowdsched {

inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {"open_tasks", "avg_similarity",
                                                                            "prize", "duration"};

/// Predictor inputs, before normalization.
struct FeatureVector {
  double open_tasks = 0.0;
  double avg_similarity = 0.0;
  double prize = 0.0;
  double duration = 0.0;

  std::array<double, kFeatureCount> values() const { return {open_tasks, avg_similarity, prize, duration}; }
  bool operator==(const FeatureVector&) const = default;
};

class FeatureError : public std::invalid_argument {
 public:
  FeatureError(std::string feature, const std::string& message)
      : std::invalid_argument(message), feature_(std::move(feature)) {}
  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

/// Builds a validated vector; throws FeatureError naming the first bad feature.
FeatureVector make_features(double open_tasks, double avg_similarity, double prize, double duration);

/// Features of `task` arriving on the state's day.
FeatureVector featurize(const TaskRecord& task, const DayState& state);
/// Features of `task` posted `projection.delta_days` later.
FeatureVector featurize(const TaskRecord& task, const FutureProjection& projection);

enum class TrainingTarget {
  task_label,        // 1 if the task received no valid submission
  day_failure_rate,  // failure rate of the pool open on the task's arrival day
};

/// Features, targets and bookkeeping for every task of a dataset.
struct LabeledSet {
  std::vector<FeatureVector> features;
  std::vector<double> labels;
  std::vector<Day> days;
  std::vector<std::string> task_ids;

  std::size_t size() const { return features.size(); }
  LabeledSet subset(std::span<const std::size_t> indices) const;
};

/// Each task is featurized against the rest of the dataset on its own
/// registration start day.
LabeledSet build_labeled_set(const Dataset& dataset, const SimilarityModel& similarity,
                             const PlatformOptions& options = {},
                             TrainingTarget target = TrainingTarget::task_label);

}  // namespace crowdsched

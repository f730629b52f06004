#include "crowdsched/features.hpp"

#include <cmath>

namespace crowdsched {

FeatureVector make_features(double open_tasks, double avg_similarity, double prize, double duration) {
  const std::array<double, kFeatureCount> values = {open_tasks, avg_similarity, prize, duration};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const std::string name(kFeatureNames[i]);
    if (!std::isfinite(values[i])) throw FeatureError(name, "feature '" + name + "' is not finite");
    if (values[i] < 0.0) throw FeatureError(name, "feature '" + name + "' is negative");
  }
  if (avg_similarity > 1.0) throw FeatureError("avg_similarity", "feature 'avg_similarity' exceeds 1");
  return {open_tasks, avg_similarity, prize, duration};
}

FeatureVector featurize(const TaskRecord& task, const DayState& state) {
  return make_features(static_cast<double>(state.open_count()), state.avg_similarity(), actual_prize(task),
                       static_cast<double>(task_duration(task)));
}

FeatureVector featurize(const TaskRecord& task, const FutureProjection& projection) {
  return make_features(projection.ot_fut, projection.ats_fut, actual_prize(task),
                       static_cast<double>(task_duration(task)));
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out;
  out.features.reserve(indices.size());
  out.labels.reserve(indices.size());
  out.days.reserve(indices.size());
  out.task_ids.reserve(indices.size());
  for (auto i : indices) {
    out.features.push_back(features[i]);
    out.labels.push_back(labels[i]);
    out.days.push_back(days[i]);
    out.task_ids.push_back(task_ids[i]);
  }
  return out;
}

LabeledSet build_labeled_set(const Dataset& dataset, const SimilarityModel& similarity,
                             const PlatformOptions& options, TrainingTarget target) {
  const TaskPool pool(dataset.tasks);
  LabeledSet set;
  set.features.reserve(dataset.tasks.size());
  set.labels.reserve(dataset.tasks.size());
  for (const auto& task : dataset.tasks) {
    const DayState state(pool, task, task.registration_start, similarity, options);
    set.features.push_back(featurize(task, state));
    set.labels.push_back(target == TrainingTarget::task_label ? (task_outcome(task).failed ? 1.0 : 0.0)
                                                              : state.failure_rate());
    set.days.push_back(task.registration_start);
    set.task_ids.push_back(task.task_id);
  }
  return set;
}

}  // namespace crowdsched

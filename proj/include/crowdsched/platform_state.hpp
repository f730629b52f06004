#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsched/similarity.hpp"
#include "crowdsched/task_model.hpp"

namespace crowdsched {

/// How TA_d is estimated from the open tasks of a day.
enum class ArrivalRateEstimator {
  /// NOT_d / sum of open registration windows. Measures the reciprocal of the
  /// mean window length.
  registration_sum,
  /// NOT_d / mean open registration window (Little's law). Recovers the
  /// arrival rate of a steady-state platform.
  littles_law,
};

/// First term of the open-task projection.
enum class ProjectionBase {
  survivors,   // tasks open today that are still open at day + delta
  full_count,  // every task open today
};

struct PlatformOptions {
  ArrivalRateEstimator arrival_rate = ArrivalRateEstimator::registration_sum;
  ProjectionBase projection = ProjectionBase::survivors;
  bool round_open_tasks = false;  // round projected counts before they become features
};

/// Tasks on the platform, indexed for day queries. Records are kept ordered
/// by (registration_start, task_id) so every aggregate is independent of the
/// order tasks were supplied in.
class TaskPool {
 public:
  TaskPool() = default;
  explicit TaskPool(std::span<const TaskRecord> tasks);

  void add(const TaskRecord& task);

  std::size_t size() const { return tasks_.size(); }
  const TaskRecord& task(std::size_t i) const { return tasks_[i]; }
  const TaskProfile& profile(std::size_t i) const { return profiles_[i]; }
  std::span<const TaskRecord> tasks() const { return tasks_; }

  /// Indices of tasks with registration_start <= day <= registration_end,
  /// skipping `exclude_id`.
  std::vector<std::size_t> open_on(Day day, std::string_view exclude_id = {}) const;

 private:
  std::vector<TaskRecord> tasks_;
  std::vector<TaskProfile> profiles_;
  Day max_window_ = 0;
};

struct PlatformSnapshot {
  Day day = 0;
  std::vector<std::string> open_tasks;
  std::size_t not_d = 0;
  double ats_d = 0.0;
  double ta_d = 0.0;
  double tf_d = 0.0;
};

struct FutureProjection {
  int delta_days = 0;
  double ot_fut = 0.0;
  double ats_fut = 0.0;
  std::size_t survivors = 0;
};

/// One day of platform state, optionally seen from an arriving task. All
/// quantities derive from the same open set, so the zero-offset projection
/// reproduces today's values exactly.
class DayState {
 public:
  DayState(const TaskPool& pool, Day day, const PlatformOptions& options = {});
  DayState(const TaskPool& pool, const TaskRecord& arriving, Day day, const SimilarityModel& similarity,
           const PlatformOptions& options = {});

  Day day() const { return day_; }
  std::size_t open_count() const { return open_.size(); }
  double avg_similarity() const;
  double arrival_rate() const { return arrival_rate_; }
  double failure_rate() const;
  std::size_t survivors(int delta_days) const;
  FutureProjection project(int delta_days) const;
  std::vector<std::string> open_task_ids() const;
  PlatformSnapshot snapshot() const;

 private:
  void init(Day day);

  const TaskPool* pool_;
  PlatformOptions options_;
  Day day_ = 0;
  std::vector<std::size_t> open_;
  std::vector<double> similarity_;  // parallel to open_, empty without an arriving task
  double arrival_rate_ = 0.0;
};

std::vector<std::size_t> open_tasks_on(const TaskPool& pool, Day day, std::string_view exclude_id = {});

/// Mean similarity of `arriving` against the `open` tasks of `pool`; 0 if none.
double avg_similarity_on(const TaskRecord& arriving, const TaskPool& pool, std::span<const std::size_t> open,
                         const SimilarityModel& similarity);

/// 1 - (open tasks with a valid submission) / NOT_d; 0 when nothing is open.
double failure_rate_on(const TaskPool& pool, Day day);

double arrival_rate_on(const TaskPool& pool, Day day,
                       ArrivalRateEstimator estimator = ArrivalRateEstimator::registration_sum);

double project_open_tasks(const TaskPool& pool, Day day, int delta_days, const PlatformOptions& options = {});

double project_avg_similarity(const TaskRecord& arriving, const TaskPool& pool, Day day, int delta_days,
                              const SimilarityModel& similarity, const PlatformOptions& options = {});

/// survivors + arrival_rate * delta, never negative.
double projected_open_tasks(double survivors, double arrival_rate, int delta_days, bool round = false);

/// (n_surv * ats_surv + rate * delta * ats_today) / (n_surv + rate * delta),
/// 0 when the denominator is 0. Without arrivals the survivors' mean is
/// returned unchanged.
double blended_avg_similarity(double survivors, double ats_survivors, double arrival_rate, int delta_days,
                              double ats_today);

/// Tasks posted per day across the whole span of registration starts.
double dataset_arrival_rate(std::span<const TaskRecord> tasks);

/// Mean over open tasks of each one's average similarity to the others.
double mean_pairwise_similarity_on(const TaskPool& pool, Day day, const SimilarityModel& similarity);

}  // namespace crowdsched

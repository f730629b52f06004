#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "crowdsched/features.hpp"
#include "crowdsched/mlp.hpp"
#include "crowdsched/platform_state.hpp"
#include "crowdsched/similarity.hpp"
#include "crowdsched/task_model.hpp"

namespace crowdsched {

inline constexpr std::array<int, 3> kOffsets = {0, 1, 2};

struct ScheduleDecision {
  std::string task_id;
  Day planned_day = 0;
  std::array<double, 3> predictions{};       // offsets 0, 1, 2
  std::array<FeatureVector, 3> features{};   // model inputs behind each prediction
  int recommended_offset = 0;                // argmin of predictions
  int chosen_offset = 0;                     // equals recommended_offset unless overridden

  Day chosen_day() const { return planned_day + chosen_offset; }
  double chosen_probability() const { return predictions[static_cast<std::size_t>(chosen_offset)]; }
};

/// Index of the smallest value; ties go to the smaller offset.
int argmin_offset(const std::array<double, 3>& predictions);

/// Scores `task` at its planned day (its registration start) against `pool`:
/// offset 0 from today's open set, offsets 1 and 2 from the projections.
ScheduleDecision recommend(const TaskRecord& task, const TaskPool& pool, const MlpModel& model,
                           const SimilarityModel& similarity, const PlatformOptions& options = {});

enum class ScheduleMode { static_mode, rolling };

std::string_view to_string(ScheduleMode mode);
ScheduleMode schedule_mode_from_string(std::string_view name);

struct ProjectSchedule {
  std::string project_id;
  ScheduleMode mode = ScheduleMode::static_mode;
  std::vector<ScheduleDecision> decisions;  // planned-day order
  double mean_before = 0.0;                 // mean p0
  double mean_after = 0.0;                  // mean probability at the chosen offsets
  Day makespan_before = 0;
  Day makespan_after = 0;
};

/// Last submission end minus first registration start.
Day makespan(std::span<const TaskRecord> tasks);

/// Ids of the tasks of `project_id` in (registration_start, task_id) order.
std::vector<std::string> project_task_ids(const Dataset& dataset, std::string_view project_id);

/// `dataset` with the records of `project` added; a project record replaces a
/// dataset record with the same id.
Dataset merge_project(const Dataset& dataset, const Dataset& project);

/// Everything needed to score tasks: immutable and shareable.
struct ScheduleInputs {
  std::shared_ptr<const Dataset> dataset;
  std::shared_ptr<const MlpModel> model;
  SimilarityModel similarity;
  PlatformOptions options;
};

/// Sequential what-if scheduling. The pool is the dataset with every
/// committed task moved to its chosen day; undecided tasks stay at their
/// planned days, so it depends only on the committed decisions.
class RollingSchedule {
 public:
  RollingSchedule(ScheduleInputs inputs, std::string project_id, std::vector<std::string> task_ids);

  std::size_t cursor() const { return decisions_.size(); }
  std::size_t size() const { return task_ids_.size(); }
  bool complete() const { return cursor() == size(); }
  const std::vector<std::string>& task_ids() const { return task_ids_; }
  const std::vector<ScheduleDecision>& decisions() const { return decisions_; }
  const std::string& project_id() const { return project_id_; }

  /// Predictions for the task at the cursor under the current pool.
  /// Throws std::logic_error when complete.
  ScheduleDecision next() const;

  /// Commits `offset` for the task at the cursor. Throws std::logic_error when
  /// complete and std::out_of_range for an offset outside {0,1,2}.
  const ScheduleDecision& decide(int offset);

  ProjectSchedule result() const;

 private:
  void rebuild_pool();

  ScheduleInputs inputs_;
  std::string project_id_;
  std::vector<std::string> task_ids_;
  std::vector<TaskRecord> current_;  // dataset records with committed shifts applied
  TaskPool pool_;
  std::vector<ScheduleDecision> decisions_;
};

ProjectSchedule schedule_project(const ScheduleInputs& inputs, const std::string& project_id,
                                 const std::vector<std::string>& task_ids, ScheduleMode mode);

/// Summary statistics over decisions already made.
ProjectSchedule summarize(std::string project_id, ScheduleMode mode, std::vector<ScheduleDecision> decisions,
                          const Dataset& dataset);

nlohmann::json to_json(const ScheduleDecision& decision);
nlohmann::json to_json(const ProjectSchedule& schedule);
/// task_id,planned_day,p0,p1,p2,chosen_offset
std::string decisions_to_csv(const ProjectSchedule& schedule);
/// Writes probabilities.csv and timeline.csv into `dir`.
void write_plot_data(const ProjectSchedule& schedule, const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace crowdsched

#include "crowdsched/scheduler.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace crowdsched {

int argmin_offset(const std::array<double, 3>& predictions) {
  int best = 0;
  for (int o = 1; o < 3; ++o) {
    if (predictions[static_cast<std::size_t>(o)] < predictions[static_cast<std::size_t>(best)]) best = o;
  }
  return best;
}

ScheduleDecision recommend(const TaskRecord& task, const TaskPool& pool, const MlpModel& model,
                           const SimilarityModel& similarity, const PlatformOptions& options) {
  const DayState state(pool, task, task.registration_start, similarity, options);
  ScheduleDecision d;
  d.task_id = task.task_id;
  d.planned_day = task.registration_start;
  d.features[0] = featurize(task, state);
  for (std::size_t o = 1; o < kOffsets.size(); ++o) d.features[o] = featurize(task, state.project(kOffsets[o]));
  for (std::size_t o = 0; o < kOffsets.size(); ++o) d.predictions[o] = model.forward(d.features[o]);
  d.recommended_offset = argmin_offset(d.predictions);
  d.chosen_offset = d.recommended_offset;
  return d;
}

std::string_view to_string(ScheduleMode mode) { return mode == ScheduleMode::rolling ? "rolling" : "static"; }

ScheduleMode schedule_mode_from_string(std::string_view name) {
  if (name == "static") return ScheduleMode::static_mode;
  if (name == "rolling") return ScheduleMode::rolling;
  throw std::invalid_argument("unknown schedule mode '" + std::string(name) + "' (expected static or rolling)");
}

Day makespan(std::span<const TaskRecord> tasks) {
  if (tasks.empty()) return 0;
  Day first = tasks.front().registration_start;
  Day last = tasks.front().submission_end;
  for (const auto& t : tasks) {
    first = std::min(first, t.registration_start);
    last = std::max(last, t.submission_end);
  }
  return last - first;
}

std::vector<std::string> project_task_ids(const Dataset& dataset, std::string_view project_id) {
  std::vector<const TaskRecord*> members;
  for (const auto& t : dataset.tasks) {
    if (t.project_id == project_id) members.push_back(&t);
  }
  if (members.empty()) throw std::out_of_range("no tasks for project '" + std::string(project_id) + "'");
  std::sort(members.begin(), members.end(), [](const TaskRecord* a, const TaskRecord* b) {
    return std::tie(a->registration_start, a->task_id) < std::tie(b->registration_start, b->task_id);
  });
  std::vector<std::string> ids;
  for (const auto* t : members) ids.push_back(t->task_id);
  return ids;
}

Dataset merge_project(const Dataset& dataset, const Dataset& project) {
  Dataset merged;
  merged.epoch = dataset.epoch;
  std::unordered_map<std::string, const TaskRecord*> overrides;
  for (const auto& t : project.tasks) overrides[t.task_id] = &t;
  for (const auto& t : dataset.tasks) {
    auto it = overrides.find(t.task_id);
    if (it == overrides.end()) {
      merged.tasks.push_back(t);
    } else {
      merged.tasks.push_back(*it->second);
      overrides.erase(it);
    }
  }
  for (const auto& t : project.tasks) {
    if (overrides.count(t.task_id) != 0) merged.tasks.push_back(t);
  }
  validate_dataset(merged);
  return merged;
}

namespace {

std::vector<std::string> ordered_ids(const Dataset& dataset, std::vector<std::string> ids) {
  std::unordered_map<std::string, const TaskRecord*> by_id;
  for (const auto& t : dataset.tasks) by_id[t.task_id] = &t;
  for (const auto& id : ids) {
    if (by_id.count(id) == 0) throw std::out_of_range("unknown task '" + id + "'");
  }
  std::sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
    return std::tie(by_id[a]->registration_start, a) < std::tie(by_id[b]->registration_start, b);
  });
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw std::invalid_argument("duplicate task id");
  return ids;
}

void check_inputs(const ScheduleInputs& inputs) {
  if (!inputs.dataset) throw std::invalid_argument("schedule needs a dataset");
  if (!inputs.model) throw std::invalid_argument("schedule needs a model");
}

}  // namespace

RollingSchedule::RollingSchedule(ScheduleInputs inputs, std::string project_id, std::vector<std::string> task_ids)
    : inputs_(std::move(inputs)), project_id_(std::move(project_id)) {
  check_inputs(inputs_);
  task_ids_ = ordered_ids(*inputs_.dataset, std::move(task_ids));
  current_ = inputs_.dataset->tasks;
  rebuild_pool();
}

void RollingSchedule::rebuild_pool() { pool_ = TaskPool(current_); }

ScheduleDecision RollingSchedule::next() const {
  if (complete()) throw std::logic_error("schedule is complete");
  const auto& id = task_ids_[cursor()];
  const auto* task = inputs_.dataset->find(id);
  return recommend(*task, pool_, *inputs_.model, inputs_.similarity, inputs_.options);
}

const ScheduleDecision& RollingSchedule::decide(int offset) {
  if (complete()) throw std::logic_error("schedule is complete");
  if (offset < 0 || offset > 2) throw std::out_of_range("offset must be 0, 1 or 2");
  ScheduleDecision d = next();
  d.chosen_offset = offset;
  if (offset != 0) {
    for (auto& t : current_) {
      if (t.task_id == d.task_id) {
        t = shifted(t, offset);
        break;
      }
    }
    rebuild_pool();
  }
  decisions_.push_back(std::move(d));
  return decisions_.back();
}

ProjectSchedule RollingSchedule::result() const {
  return summarize(project_id_, ScheduleMode::rolling, decisions_, *inputs_.dataset);
}

ProjectSchedule summarize(std::string project_id, ScheduleMode mode, std::vector<ScheduleDecision> decisions,
                          const Dataset& dataset) {
  ProjectSchedule s;
  s.project_id = std::move(project_id);
  s.mode = mode;
  std::vector<TaskRecord> before;
  std::vector<TaskRecord> after;
  double sum_before = 0.0;
  double sum_after = 0.0;
  for (const auto& d : decisions) {
    sum_before += d.predictions[0];
    sum_after += d.chosen_probability();
    const auto* t = dataset.find(d.task_id);
    if (t == nullptr) throw std::out_of_range("unknown task '" + d.task_id + "'");
    before.push_back(*t);
    after.push_back(shifted(*t, d.chosen_offset));
  }
  if (!decisions.empty()) {
    s.mean_before = sum_before / static_cast<double>(decisions.size());
    s.mean_after = sum_after / static_cast<double>(decisions.size());
  }
  s.makespan_before = makespan(before);
  s.makespan_after = makespan(after);
  s.decisions = std::move(decisions);
  return s;
}

ProjectSchedule schedule_project(const ScheduleInputs& inputs, const std::string& project_id,
                                 const std::vector<std::string>& task_ids, ScheduleMode mode) {
  check_inputs(inputs);
  if (mode == ScheduleMode::rolling) {
    RollingSchedule rolling(inputs, project_id, task_ids);
    while (!rolling.complete()) rolling.decide(rolling.next().recommended_offset);
    return rolling.result();
  }
  const auto ids = ordered_ids(*inputs.dataset, task_ids);
  const TaskPool pool(inputs.dataset->tasks);
  std::vector<ScheduleDecision> decisions;
  decisions.reserve(ids.size());
  for (const auto& id : ids) {
    decisions.push_back(recommend(*inputs.dataset->find(id), pool, *inputs.model, inputs.similarity, inputs.options));
  }
  return summarize(project_id, mode, std::move(decisions), *inputs.dataset);
}

nlohmann::json to_json(const ScheduleDecision& d) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : d.features) {
    features.push_back({{"open_tasks", f.open_tasks},
                        {"avg_similarity", f.avg_similarity},
                        {"prize", f.prize},
                        {"duration", f.duration}});
  }
  return {
      {"task_id", d.task_id},
      {"planned_day", d.planned_day},
      {"predictions", d.predictions},
      {"features", features},
      {"recommended_offset", d.recommended_offset},
      {"chosen_offset", d.chosen_offset},
      {"chosen_day", d.chosen_day()},
  };
}

nlohmann::json to_json(const ProjectSchedule& s) {
  nlohmann::json decisions = nlohmann::json::array();
  for (const auto& d : s.decisions) decisions.push_back(to_json(d));
  return {
      {"project_id", s.project_id},
      {"mode", to_string(s.mode)},
      {"task_count", s.decisions.size()},
      {"mean_before", s.mean_before},
      {"mean_after", s.mean_after},
      {"makespan_before", s.makespan_before},
      {"makespan_after", s.makespan_after},
      {"decisions", decisions},
  };
}

std::string decisions_to_csv(const ProjectSchedule& schedule) {
  std::string out = "task_id,planned_day,p0,p1,p2,chosen_offset\n";
  for (const auto& d : schedule.decisions) {
    out += d.task_id + ',' + std::to_string(d.planned_day);
    for (double p : d.predictions) out += ',' + format_double(p);
    out += ',' + std::to_string(d.chosen_offset) + '\n';
  }
  return out;
}

void write_plot_data(const ProjectSchedule& schedule, const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("probabilities.csv");
    out << "task_id,planned_day,p0,p1,p2,chosen_offset,p_before,p_after\n";
    for (const auto& d : schedule.decisions) {
      out << d.task_id << ',' << d.planned_day;
      for (double p : d.predictions) out << ',' << format_double(p);
      out << ',' << d.chosen_offset << ',' << format_double(d.predictions[0]) << ','
          << format_double(d.chosen_probability()) << '\n';
    }
  }
  {
    auto out = open("timeline.csv");
    out << "task_id,start_before,end_before,start_after,end_after\n";
    for (const auto& d : schedule.decisions) {
      const auto* t = dataset.find(d.task_id);
      if (t == nullptr) throw std::out_of_range("unknown task '" + d.task_id + "'");
      out << d.task_id << ',' << t->registration_start << ',' << t->submission_end << ','
          << t->registration_start + d.chosen_offset << ',' << t->submission_end + d.chosen_offset << '\n';
    }
  }
}

}  // namespace crowdsched

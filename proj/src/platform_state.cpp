#include "crowdsched/platform_state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace crowdsched {

namespace {

bool pool_order(const TaskRecord& a, const TaskRecord& b) {
  return std::tie(a.registration_start, a.task_id) < std::tie(b.registration_start, b.task_id);
}

double arrival_rate_of(const TaskPool& pool, std::span<const std::size_t> open, ArrivalRateEstimator estimator) {
  if (open.empty()) return 0.0;
  Day total_window = 0;
  for (auto i : open) total_window += pool.task(i).registration_end - pool.task(i).registration_start;
  const double n = static_cast<double>(open.size());
  // Every open task has a window of zero days: count each as one day.
  const double total = total_window > 0 ? static_cast<double>(total_window) : n;
  switch (estimator) {
    case ArrivalRateEstimator::registration_sum:
      return n / total;
    case ArrivalRateEstimator::littles_law:
      return n * n / total;
  }
  return 0.0;
}

}  // namespace

TaskPool::TaskPool(std::span<const TaskRecord> tasks) : tasks_(tasks.begin(), tasks.end()) {
  std::sort(tasks_.begin(), tasks_.end(), pool_order);
  profiles_.reserve(tasks_.size());
  for (const auto& t : tasks_) {
    profiles_.push_back(make_profile(t));
    max_window_ = std::max(max_window_, t.registration_end - t.registration_start);
  }
}

void TaskPool::add(const TaskRecord& task) {
  auto it = std::upper_bound(tasks_.begin(), tasks_.end(), task, pool_order);
  const auto pos = static_cast<std::size_t>(it - tasks_.begin());
  tasks_.insert(it, task);
  profiles_.insert(profiles_.begin() + static_cast<std::ptrdiff_t>(pos), make_profile(task));
  max_window_ = std::max(max_window_, task.registration_end - task.registration_start);
}

std::vector<std::size_t> TaskPool::open_on(Day day, std::string_view exclude_id) const {
  std::vector<std::size_t> open;
  const Day earliest = day - max_window_;
  auto it = std::lower_bound(tasks_.begin(), tasks_.end(), earliest,
                             [](const TaskRecord& t, Day d) { return t.registration_start < d; });
  for (; it != tasks_.end() && it->registration_start <= day; ++it) {
    if (it->registration_end >= day && it->task_id != exclude_id) {
      open.push_back(static_cast<std::size_t>(it - tasks_.begin()));
    }
  }
  return open;
}

DayState::DayState(const TaskPool& pool, Day day, const PlatformOptions& options)
    : pool_(&pool), options_(options) {
  open_ = pool.open_on(day);
  init(day);
}

DayState::DayState(const TaskPool& pool, const TaskRecord& arriving, Day day, const SimilarityModel& similarity,
                   const PlatformOptions& options)
    : pool_(&pool), options_(options) {
  open_ = pool.open_on(day, arriving.task_id);
  const TaskProfile profile = make_profile(arriving);
  similarity_.reserve(open_.size());
  for (auto i : open_) similarity_.push_back(similarity.score(profile, pool.profile(i)));
  init(day);
}

void DayState::init(Day day) {
  day_ = day;
  arrival_rate_ = arrival_rate_of(*pool_, open_, options_.arrival_rate);
}

double DayState::avg_similarity() const {
  if (similarity_.empty()) return 0.0;
  double sum = 0.0;
  for (double s : similarity_) sum += s;
  return sum / static_cast<double>(similarity_.size());
}

double DayState::failure_rate() const {
  if (open_.empty()) return 0.0;
  std::size_t succeeded = 0;
  for (auto i : open_) succeeded += pool_->task(i).valid_submissions >= 1 ? 1 : 0;
  return 1.0 - static_cast<double>(succeeded) / static_cast<double>(open_.size());
}

std::size_t DayState::survivors(int delta_days) const {
  const Day horizon = day_ + delta_days;
  return static_cast<std::size_t>(std::count_if(open_.begin(), open_.end(), [&](std::size_t i) {
    return pool_->task(i).registration_end >= horizon;
  }));
}

FutureProjection DayState::project(int delta_days) const {
  if (delta_days < 0) throw std::invalid_argument("projection offset must be >= 0");
  FutureProjection out;
  out.delta_days = delta_days;

  const Day horizon = day_ + delta_days;
  std::size_t kept = 0;
  double kept_similarity = 0.0;
  if (options_.projection == ProjectionBase::full_count) {
    kept = open_.size();
    for (double s : similarity_) kept_similarity += s;
  } else {
    for (std::size_t k = 0; k < open_.size(); ++k) {
      if (pool_->task(open_[k]).registration_end >= horizon) {
        ++kept;
        if (!similarity_.empty()) kept_similarity += similarity_[k];
      }
    }
  }
  out.survivors = kept;
  out.ot_fut = projected_open_tasks(static_cast<double>(kept), arrival_rate_, delta_days,
                                    options_.round_open_tasks);
  if (!similarity_.empty()) {
    const double ats_kept = kept > 0 ? kept_similarity / static_cast<double>(kept) : 0.0;
    out.ats_fut = blended_avg_similarity(static_cast<double>(kept), ats_kept, arrival_rate_, delta_days,
                                         avg_similarity());
  }
  return out;
}

std::vector<std::string> DayState::open_task_ids() const {
  std::vector<std::string> ids;
  ids.reserve(open_.size());
  for (auto i : open_) ids.push_back(pool_->task(i).task_id);
  return ids;
}

PlatformSnapshot DayState::snapshot() const {
  PlatformSnapshot s;
  s.day = day_;
  s.open_tasks = open_task_ids();
  s.not_d = open_.size();
  s.ats_d = avg_similarity();
  s.ta_d = arrival_rate_;
  s.tf_d = failure_rate();
  return s;
}

std::vector<std::size_t> open_tasks_on(const TaskPool& pool, Day day, std::string_view exclude_id) {
  return pool.open_on(day, exclude_id);
}

double avg_similarity_on(const TaskRecord& arriving, const TaskPool& pool, std::span<const std::size_t> open,
                         const SimilarityModel& similarity) {
  if (open.empty()) return 0.0;
  const TaskProfile profile = make_profile(arriving);
  double sum = 0.0;
  for (auto i : open) sum += similarity.score(profile, pool.profile(i));
  return sum / static_cast<double>(open.size());
}

double failure_rate_on(const TaskPool& pool, Day day) { return DayState(pool, day).failure_rate(); }

double arrival_rate_on(const TaskPool& pool, Day day, ArrivalRateEstimator estimator) {
  const auto open = pool.open_on(day);
  return arrival_rate_of(pool, open, estimator);
}

double project_open_tasks(const TaskPool& pool, Day day, int delta_days, const PlatformOptions& options) {
  return DayState(pool, day, options).project(delta_days).ot_fut;
}

double project_avg_similarity(const TaskRecord& arriving, const TaskPool& pool, Day day, int delta_days,
                              const SimilarityModel& similarity, const PlatformOptions& options) {
  return DayState(pool, arriving, day, similarity, options).project(delta_days).ats_fut;
}

double projected_open_tasks(double survivors, double arrival_rate, int delta_days, bool round) {
  const double value = std::max(0.0, survivors + arrival_rate * static_cast<double>(delta_days));
  return round ? std::round(value) : value;
}

double blended_avg_similarity(double survivors, double ats_survivors, double arrival_rate, int delta_days,
                              double ats_today) {
  const double arrivals = arrival_rate * static_cast<double>(delta_days);
  if (arrivals == 0.0) return survivors > 0.0 ? ats_survivors : 0.0;
  const double denominator = survivors + arrivals;
  if (!(denominator > 0.0)) return 0.0;
  return std::clamp((survivors * ats_survivors + arrivals * ats_today) / denominator, 0.0, 1.0);
}

double dataset_arrival_rate(std::span<const TaskRecord> tasks) {
  if (tasks.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(tasks.begin(), tasks.end(), [](const TaskRecord& a, const TaskRecord& b) {
    return a.registration_start < b.registration_start;
  });
  const double span_days = static_cast<double>(hi->registration_start - lo->registration_start + 1);
  return static_cast<double>(tasks.size()) / span_days;
}

double mean_pairwise_similarity_on(const TaskPool& pool, Day day, const SimilarityModel& similarity) {
  const auto open = pool.open_on(day);
  if (open.size() < 2) return 0.0;
  double total = 0.0;
  for (auto i : open) {
    double sum = 0.0;
    for (auto j : open) {
      if (i != j) sum += similarity.score(pool.profile(i), pool.profile(j));
    }
    total += sum / static_cast<double>(open.size() - 1);
  }
  return total / static_cast<double>(open.size());
}

}  // namespace crowdsched

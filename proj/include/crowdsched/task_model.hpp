#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace crowdsched {

/// Calendar day index counted from a dataset epoch.
using Day = std::int64_t;

/// One crowdsourced competition task. Dates are day indices; prizes are USD.
struct TaskRecord {
  std::string task_id;
  Day registration_start = 0;
  Day registration_end = 0;
  Day submission_end = 0;
  double winner_prize = 0.0;
  double runnerup_prize = 0.0;
  std::string task_type;
  std::set<std::string> technologies;
  int platform_count = 0;
  std::string requirement_text;
  int valid_submissions = 0;
  int registrations = 0;
  int submissions = 0;

  // Optional columns. Empty project_id means "no project".
  std::string project_id;
  bool cancelled = false;

  bool operator==(const TaskRecord&) const = default;
};

struct TaskOutcome {
  bool failed = false;
};

/// Failure is derived from the record: no valid submission means failed.
TaskOutcome task_outcome(const TaskRecord& task);

/// Days from registration start to submission deadline.
Day task_duration(const TaskRecord& task);

/// Winner plus runner-up prize.
double actual_prize(const TaskRecord& task);

/// Copy of `task` with every date moved by `offset` days.
TaskRecord shifted(const TaskRecord& task, Day offset);

struct Dataset {
  std::vector<TaskRecord> tasks;
  // ISO date mapped to day 0. Informational only; never written to task files.
  std::string epoch;

  const TaskRecord* find(std::string_view task_id) const;
};

enum class DatasetFormat { csv, json };

struct LoadOptions {
  bool exclude_cancelled = false;
};

/// Raised for malformed input and invariant violations. `row` is the 1-based
/// line (CSV) or 0-based array index (JSON) of the offending record, or -1.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& message, long row = -1, std::string field = {},
               std::vector<std::string> task_ids = {});

  long row() const noexcept { return row_; }
  const std::string& field() const noexcept { return field_; }
  const std::vector<std::string>& task_ids() const noexcept { return task_ids_; }

 private:
  long row_;
  std::string field_;
  std::vector<std::string> task_ids_;
};

/// Checks every record and dataset-level invariant; throws DatasetError listing
/// the offending task ids.
void validate_dataset(const Dataset& dataset);

DatasetFormat format_from_path(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LoadOptions& options = {});
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

Dataset parse_csv_dataset(std::string_view text, const LoadOptions& options = {});
Dataset parse_json_dataset(const nlohmann::json& document, const LoadOptions& options = {});

std::string to_csv(const Dataset& dataset);
nlohmann::json to_json(const Dataset& dataset);
nlohmann::json to_json(const TaskRecord& task);
TaskRecord task_from_json(const nlohmann::json& object);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace crowdsched

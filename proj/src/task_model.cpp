#include "crowdsched/task_model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "crowdsched/csv.hpp"

namespace crowdsched {

namespace {

constexpr std::array<std::string_view, 13> kRequiredColumns = {
    "task_id",       "registration_start", "registration_end", "submission_end",
    "winner_prize",  "runnerup_prize",     "task_type",        "technologies",
    "platform_count", "registrations",     "submissions",      "valid_submissions",
    "requirement_text"};
constexpr std::array<std::string_view, 2> kOptionalColumns = {"project_id", "cancelled"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

template <typename Int>
Int parse_integer(std::string_view raw, long row, std::string_view field) {
  const std::string text = trim(raw);
  Int value{};
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw DatasetError("row " + std::to_string(row) + ", field '" + std::string(field) +
                           "': expected an integer, got '" + std::string(raw) + "'",
                       row, std::string(field));
  }
  return value;
}

double parse_real(std::string_view raw, long row, std::string_view field, bool empty_is_zero) {
  const std::string text = trim(raw);
  if (text.empty() && empty_is_zero) return 0.0;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw DatasetError("row " + std::to_string(row) + ", field '" + std::string(field) +
                           "': expected a number, got '" + std::string(raw) + "'",
                       row, std::string(field));
  }
  return value;
}

bool parse_bool(std::string_view raw, long row, std::string_view field) {
  const std::string text = trim(raw);
  if (text.empty() || text == "0" || text == "false") return false;
  if (text == "1" || text == "true") return true;
  throw DatasetError("row " + std::to_string(row) + ", field '" + std::string(field) +
                         "': expected true/false, got '" + std::string(raw) + "'",
                     row, std::string(field));
}

std::set<std::string> split_technologies(std::string_view raw) {
  std::set<std::string> out;
  std::size_t start = 0;
  while (start <= raw.size()) {
    const auto bar = raw.find('|', start);
    const auto piece = trim(raw.substr(start, bar == std::string_view::npos ? raw.npos : bar - start));
    if (!piece.empty()) out.insert(piece);
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

std::string join_technologies(const std::set<std::string>& techs) {
  std::string out;
  for (const auto& t : techs) {
    if (!out.empty()) out.push_back('|');
    out += t;
  }
  return out;
}

// Record-level checks; returns a description of the first violation or nullopt.
std::optional<std::string> record_violation(const TaskRecord& t) {
  if (t.task_id.empty()) return "empty task_id";
  if (t.registration_start < 0) return "registration_start < 0";
  if (t.registration_start > t.registration_end) return "registration_start > registration_end";
  if (t.registration_end > t.submission_end) return "registration_end > submission_end";
  if (!(t.winner_prize >= 0.0)) return "winner_prize < 0";
  if (!(t.runnerup_prize >= 0.0)) return "runnerup_prize < 0";
  if (t.platform_count < 0) return "platform_count < 0";
  if (t.valid_submissions < 0) return "valid_submissions < 0";
  if (t.valid_submissions > t.submissions) return "valid_submissions > submissions";
  if (t.submissions > t.registrations) return "submissions > registrations";
  for (const auto& tech : t.technologies) {
    if (tech.empty() || tech.find('|') != std::string::npos) {
      return "technology name '" + tech + "' is empty or contains '|'";
    }
  }
  return std::nullopt;
}

Dataset finish(std::vector<TaskRecord> tasks, const LoadOptions& options) {
  Dataset dataset;
  if (options.exclude_cancelled) {
    std::erase_if(tasks, [](const TaskRecord& t) { return t.cancelled; });
  }
  dataset.tasks = std::move(tasks);
  validate_dataset(dataset);
  return dataset;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

DatasetError::DatasetError(const std::string& message, long row, std::string field,
                           std::vector<std::string> task_ids)
    : std::runtime_error(message), row_(row), field_(std::move(field)), task_ids_(std::move(task_ids)) {}

TaskOutcome task_outcome(const TaskRecord& task) { return {task.valid_submissions == 0}; }

Day task_duration(const TaskRecord& task) { return task.submission_end - task.registration_start; }

double actual_prize(const TaskRecord& task) { return task.winner_prize + task.runnerup_prize; }

TaskRecord shifted(const TaskRecord& task, Day offset) {
  TaskRecord out = task;
  out.registration_start += offset;
  out.registration_end += offset;
  out.submission_end += offset;
  return out;
}

const TaskRecord* Dataset::find(std::string_view task_id) const {
  auto it = std::find_if(tasks.begin(), tasks.end(),
                         [&](const TaskRecord& t) { return t.task_id == task_id; });
  return it == tasks.end() ? nullptr : &*it;
}

void validate_dataset(const Dataset& dataset) {
  if (dataset.tasks.empty()) throw DatasetError("dataset is empty");

  std::vector<std::string> offenders;
  std::string first_message;
  long first_row = -1;
  for (std::size_t i = 0; i < dataset.tasks.size(); ++i) {
    if (auto violation = record_violation(dataset.tasks[i])) {
      if (offenders.empty()) {
        first_message = *violation;
        first_row = static_cast<long>(i);
      }
      offenders.push_back(dataset.tasks[i].task_id);
    }
  }
  if (!offenders.empty()) {
    std::string message = "invariant violation in task(s) ";
    for (std::size_t i = 0; i < offenders.size() && i < 10; ++i) {
      if (i) message += ", ";
      message += "'" + offenders[i] + "'";
    }
    if (offenders.size() > 10) message += " and " + std::to_string(offenders.size() - 10) + " more";
    message += ": " + first_message;
    throw DatasetError(message, first_row, {}, std::move(offenders));
  }

  std::unordered_set<std::string_view> seen;
  std::vector<std::string> duplicates;
  for (const auto& t : dataset.tasks) {
    if (!seen.insert(t.task_id).second) duplicates.push_back(t.task_id);
  }
  if (!duplicates.empty()) {
    const std::string message = "duplicate task_id '" + duplicates.front() + "'";
    throw DatasetError(message, -1, "task_id", std::move(duplicates));
  }
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return DatasetFormat::csv;
  if (ext == ".json") return DatasetFormat::json;
  throw DatasetError("cannot infer dataset format from '" + path.string() + "' (use .csv or .json)");
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LoadOptions& options) {
  const std::string text = read_file(path);
  if (format == DatasetFormat::csv) return parse_csv_dataset(text, options);
  nlohmann::json document;
  try {
    document = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
  return parse_json_dataset(document, options);
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  return load_dataset(path, format_from_path(path), options);
}

Dataset parse_csv_dataset(std::string_view text, const LoadOptions& options) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(text);
  } catch (const std::runtime_error& e) {
    throw DatasetError(std::string("CSV parse error: ") + e.what());
  }
  if (rows.empty()) throw DatasetError("CSV input has no header");

  // Column name -> position.
  std::map<std::string, std::size_t, std::less<>> columns;
  const auto& header = rows.front();
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    std::string name = trim(header.fields[i]);
    if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
    const bool known =
        std::find(kRequiredColumns.begin(), kRequiredColumns.end(), name) != kRequiredColumns.end() ||
        std::find(kOptionalColumns.begin(), kOptionalColumns.end(), name) != kOptionalColumns.end();
    if (!known) throw DatasetError("unknown CSV column '" + name + "'", header.line, name);
    if (!columns.emplace(name, i).second) {
      throw DatasetError("duplicate CSV column '" + name + "'", header.line, name);
    }
  }
  for (auto name : kRequiredColumns) {
    if (!columns.contains(name)) {
      throw DatasetError("missing CSV column '" + std::string(name) + "'", header.line, std::string(name));
    }
  }

  std::vector<TaskRecord> tasks;
  tasks.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.fields.size()) {
      throw DatasetError("row " + std::to_string(row.line) + ": expected " +
                             std::to_string(header.fields.size()) + " fields, got " +
                             std::to_string(row.fields.size()),
                         row.line);
    }
    auto get = [&](std::string_view name) -> const std::string& {
      return row.fields[columns.find(name)->second];
    };
    auto has = [&](std::string_view name) { return columns.find(name) != columns.end(); };
    const long line = row.line;

    TaskRecord t;
    t.task_id = trim(get("task_id"));
    t.registration_start = parse_integer<Day>(get("registration_start"), line, "registration_start");
    t.registration_end = parse_integer<Day>(get("registration_end"), line, "registration_end");
    t.submission_end = parse_integer<Day>(get("submission_end"), line, "submission_end");
    t.winner_prize = parse_real(get("winner_prize"), line, "winner_prize", false);
    t.runnerup_prize = parse_real(get("runnerup_prize"), line, "runnerup_prize", true);
    t.task_type = trim(get("task_type"));
    t.technologies = split_technologies(get("technologies"));
    t.platform_count = parse_integer<int>(get("platform_count"), line, "platform_count");
    t.registrations = parse_integer<int>(get("registrations"), line, "registrations");
    t.submissions = parse_integer<int>(get("submissions"), line, "submissions");
    t.valid_submissions = parse_integer<int>(get("valid_submissions"), line, "valid_submissions");
    t.requirement_text = get("requirement_text");
    if (has("project_id")) t.project_id = trim(get("project_id"));
    if (has("cancelled")) t.cancelled = parse_bool(get("cancelled"), line, "cancelled");
    tasks.push_back(std::move(t));
  }

  std::map<std::string, long, std::less<>> line_of;
  for (std::size_t i = 0; i < tasks.size(); ++i) line_of.emplace(tasks[i].task_id, rows[i + 1].line);
  try {
    return finish(std::move(tasks), options);
  } catch (const DatasetError& e) {
    // Report the CSV line of the first offending record.
    if (!e.task_ids().empty()) {
      if (auto it = line_of.find(e.task_ids().front()); it != line_of.end()) {
        throw DatasetError("line " + std::to_string(it->second) + ": " + e.what(), it->second,
                           e.field(), e.task_ids());
      }
    }
    throw;
  }
}

TaskRecord task_from_json(const nlohmann::json& o) {
  if (!o.is_object()) throw DatasetError("task entry is not a JSON object");
  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = o.find(key);
    if (it == o.end()) throw DatasetError(std::string("missing field '") + key + "'", -1, key);
    return *it;
  };
  auto read = [&](const char* key, auto& out) {
    const auto& v = require(key);
    try {
      v.get_to(out);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(std::string("field '") + key + "': " + e.what(), -1, key);
    }
  };

  TaskRecord t;
  read("task_id", t.task_id);
  read("registration_start", t.registration_start);
  read("registration_end", t.registration_end);
  read("submission_end", t.submission_end);
  read("winner_prize", t.winner_prize);
  if (auto it = o.find("runnerup_prize"); it != o.end() && !it->is_null()) {
    if (!it->is_number()) throw DatasetError("field 'runnerup_prize': expected a number", -1, "runnerup_prize");
    t.runnerup_prize = it->get<double>();
  }
  read("task_type", t.task_type);
  const auto& techs = require("technologies");
  if (techs.is_string()) {
    t.technologies = split_technologies(techs.get<std::string>());
  } else if (techs.is_array()) {
    for (const auto& tech : techs) {
      if (!tech.is_string()) throw DatasetError("field 'technologies': expected strings", -1, "technologies");
      t.technologies.insert(tech.get<std::string>());
    }
  } else {
    throw DatasetError("field 'technologies': expected array or '|'-separated string", -1, "technologies");
  }
  read("platform_count", t.platform_count);
  read("registrations", t.registrations);
  read("submissions", t.submissions);
  read("valid_submissions", t.valid_submissions);
  read("requirement_text", t.requirement_text);
  if (auto it = o.find("project_id"); it != o.end() && !it->is_null()) t.project_id = it->get<std::string>();
  if (auto it = o.find("cancelled"); it != o.end() && !it->is_null()) t.cancelled = it->get<bool>();
  for (const char* key : {"registration_start", "registration_end", "submission_end", "platform_count",
                          "registrations", "submissions", "valid_submissions"}) {
    if (!o.at(key).is_number_integer()) {
      throw DatasetError(std::string("field '") + key + "': expected an integer", -1, key);
    }
  }
  return t;
}

Dataset parse_json_dataset(const nlohmann::json& document, const LoadOptions& options) {
  if (!document.is_array()) throw DatasetError("JSON dataset must be an array of task objects");
  std::vector<TaskRecord> tasks;
  tasks.reserve(document.size());
  for (std::size_t i = 0; i < document.size(); ++i) {
    try {
      tasks.push_back(task_from_json(document[i]));
    } catch (const DatasetError& e) {
      throw DatasetError("element " + std::to_string(i) + ": " + e.what(), static_cast<long>(i), e.field());
    }
  }
  return finish(std::move(tasks), options);
}

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), ptr);
}

std::string to_csv(const Dataset& dataset) {
  const bool with_project = std::any_of(dataset.tasks.begin(), dataset.tasks.end(),
                                        [](const TaskRecord& t) { return !t.project_id.empty(); });
  const bool with_cancelled = std::any_of(dataset.tasks.begin(), dataset.tasks.end(),
                                          [](const TaskRecord& t) { return t.cancelled; });
  std::string out;
  for (std::size_t i = 0; i < kRequiredColumns.size(); ++i) {
    if (i) out.push_back(',');
    out += kRequiredColumns[i];
  }
  if (with_project) out += ",project_id";
  if (with_cancelled) out += ",cancelled";
  out.push_back('\n');

  for (const auto& t : dataset.tasks) {
    out += csv::escape(t.task_id);
    out += ',' + std::to_string(t.registration_start);
    out += ',' + std::to_string(t.registration_end);
    out += ',' + std::to_string(t.submission_end);
    out += ',' + format_double(t.winner_prize);
    out += ',' + format_double(t.runnerup_prize);
    out += ',' + csv::escape(t.task_type);
    out += ',' + csv::escape(join_technologies(t.technologies));
    out += ',' + std::to_string(t.platform_count);
    out += ',' + std::to_string(t.registrations);
    out += ',' + std::to_string(t.submissions);
    out += ',' + std::to_string(t.valid_submissions);
    out += ',' + csv::escape(t.requirement_text, true);
    if (with_project) out += ',' + csv::escape(t.project_id);
    if (with_cancelled) out += t.cancelled ? ",true" : ",false";
    out.push_back('\n');
  }
  return out;
}

nlohmann::json to_json(const TaskRecord& t) {
  nlohmann::json o = {
      {"task_id", t.task_id},
      {"registration_start", t.registration_start},
      {"registration_end", t.registration_end},
      {"submission_end", t.submission_end},
      {"winner_prize", t.winner_prize},
      {"runnerup_prize", t.runnerup_prize},
      {"task_type", t.task_type},
      {"technologies", t.technologies},
      {"platform_count", t.platform_count},
      {"registrations", t.registrations},
      {"submissions", t.submissions},
      {"valid_submissions", t.valid_submissions},
      {"requirement_text", t.requirement_text},
  };
  if (!t.project_id.empty()) o["project_id"] = t.project_id;
  if (t.cancelled) o["cancelled"] = true;
  return o;
}

nlohmann::json to_json(const Dataset& dataset) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : dataset.tasks) out.push_back(to_json(t));
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  if (format == DatasetFormat::csv) {
    out << to_csv(dataset);
  } else {
    out << to_json(dataset).dump(1) << '\n';
  }
  if (!out) throw DatasetError("write failed for " + path.string());
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  save_dataset(dataset, path, format_from_path(path));
}

}  // namespace crowdsched

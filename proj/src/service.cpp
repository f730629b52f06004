#include "crowdsched/service.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "crowdsched/features.hpp"
#include "crowdsched/scheduler.hpp"
#include "crowdsched/training.hpp"

namespace crowdsched {

namespace {

using nlohmann::json;

struct ApiError : std::runtime_error {
  ApiError(int status, const std::string& message, std::string field = {})
      : std::runtime_error(message), status(status), field(std::move(field)) {}
  int status;
  std::string field;
};

HttpResponse reply(int status, const json& body) { return {status, body.dump()}; }

HttpResponse error_reply(int status, const std::string& message, const std::string& field = {}) {
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return reply(status, body);
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ApiError(400, std::string("malformed JSON: ") + e.what());
  }
}

const json& require(const json& body, const char* key) {
  if (!body.is_object()) throw ApiError(400, "request body must be a JSON object");
  auto it = body.find(key);
  if (it == body.end()) throw ApiError(400, std::string("missing field '") + key + "'", key);
  return *it;
}

std::optional<std::string> optional_string(const json& body, const char* key) {
  if (!body.is_object()) throw ApiError(400, "request body must be a JSON object");
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ApiError(400, std::string("field '") + key + "' must be a string", key);
  return it->get<std::string>();
}

std::optional<std::int64_t> optional_integer(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw ApiError(400, std::string("field '") + key + "' must be an integer", key);
  return it->get<std::int64_t>();
}

double number_field(const json& object, const char* key, const std::string& prefix) {
  auto it = object.find(key);
  const std::string field = prefix + key;
  if (it == object.end()) throw ApiError(400, "missing field '" + field + "'", field);
  if (!it->is_number()) throw ApiError(400, "field '" + field + "' must be a number", field);
  return it->get<double>();
}

json task_error_body(const DatasetError& e) {
  json body = {{"error", e.what()}};
  if (e.row() > 0) body["row"] = e.row();
  if (!e.field().empty()) body["field"] = e.field();
  if (!e.task_ids().empty()) body["task_ids"] = e.task_ids();
  return body;
}

struct DatasetEntry {
  std::shared_ptr<const Dataset> dataset;
  SimilarityModel similarity;
  std::shared_ptr<const TaskPool> pool;
};

struct Session {
  Session(std::string id, std::string dataset_id, std::string model_id, RollingSchedule schedule)
      : id(std::move(id)), dataset_id(std::move(dataset_id)), model_id(std::move(model_id)),
        schedule(std::move(schedule)) {}

  const std::string id;
  const std::string dataset_id;
  const std::string model_id;
  std::mutex mutex;
  RollingSchedule schedule;
};

json session_view(const Session& s) {
  return {
      {"session_id", s.id},
      {"dataset_id", s.dataset_id},
      {"model_id", s.model_id},
      {"project_id", s.schedule.project_id()},
      {"mode", "rolling"},
      {"cursor", s.schedule.cursor()},
      {"task_count", s.schedule.size()},
      {"complete", s.schedule.complete()},
      {"task_ids", s.schedule.task_ids()},
      {"schedule", to_json(s.schedule.result())},
  };
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    const auto next = path.find('/', pos);
    const auto end = next == std::string_view::npos ? path.size() : next;
    if (end > pos) parts.emplace_back(path.substr(pos, end - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceOptions opts) : options(std::move(opts)) {}

  ServiceOptions options;
  std::shared_mutex registry_mutex;
  std::map<std::string, DatasetEntry> datasets;
  std::map<std::string, std::shared_ptr<const MlpModel>> models;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::string latest_dataset;
  std::string latest_model;
  std::size_t next_dataset = 1;
  std::size_t next_model = 1;
  std::size_t next_session = 1;
  httplib::Server server;

  std::string register_dataset(Dataset dataset) {
    validate_dataset(dataset);
    auto shared = std::make_shared<const Dataset>(std::move(dataset));
    DatasetEntry entry{shared, {options.config.weights, SimilarityContext::from_tasks(shared->tasks)},
                       std::make_shared<const TaskPool>(shared->tasks)};
    std::unique_lock lock(registry_mutex);
    std::string id = "d" + std::to_string(next_dataset++);
    datasets.emplace(id, std::move(entry));
    latest_dataset = id;
    return id;
  }

  std::string register_model(MlpModel model) {
    auto shared = std::make_shared<const MlpModel>(std::move(model));
    std::unique_lock lock(registry_mutex);
    std::string id = "m" + std::to_string(next_model++);
    models.emplace(id, std::move(shared));
    latest_model = id;
    return id;
  }

  std::pair<std::string, DatasetEntry> dataset_for(const json& body) {
    auto id = optional_string(body, "dataset_id");
    std::shared_lock lock(registry_mutex);
    if (!id) {
      if (latest_dataset.empty()) throw ApiError(404, "no dataset uploaded", "dataset_id");
      id = latest_dataset;
    }
    auto it = datasets.find(*id);
    if (it == datasets.end()) throw ApiError(404, "unknown dataset '" + *id + "'", "dataset_id");
    return {*id, it->second};
  }

  std::pair<std::string, std::shared_ptr<const MlpModel>> model_for(const json& body) {
    auto id = optional_string(body, "model_id");
    std::shared_lock lock(registry_mutex);
    if (!id) {
      if (latest_model.empty()) throw ApiError(503, "no model loaded", "model_id");
      id = latest_model;
    }
    auto it = models.find(*id);
    if (it == models.end()) throw ApiError(404, "unknown model '" + *id + "'", "model_id");
    return {*id, it->second};
  }

  std::shared_ptr<Session> session_for(const std::string& id) {
    std::shared_lock lock(registry_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw ApiError(404, "unknown session '" + id + "'");
    return it->second;
  }

  ScheduleInputs inputs_for(const DatasetEntry& entry, std::shared_ptr<const MlpModel> model) const {
    return {entry.dataset, std::move(model), entry.similarity, options.config.platform};
  }

  std::vector<std::string> project_ids_for(const json& body, const Dataset& dataset) {
    if (body.contains("task_ids")) {
      const auto& ids = body["task_ids"];
      if (!ids.is_array() || ids.empty()) throw ApiError(400, "field 'task_ids' must be a non-empty array", "task_ids");
      std::vector<std::string> out;
      for (const auto& id : ids) {
        if (!id.is_string()) throw ApiError(400, "field 'task_ids' must hold strings", "task_ids");
        if (dataset.find(id.get<std::string>()) == nullptr) {
          throw ApiError(404, "unknown task '" + id.get<std::string>() + "'", "task_ids");
        }
        out.push_back(id.get<std::string>());
      }
      return out;
    }
    const auto project = optional_string(body, "project_id");
    if (!project) throw ApiError(400, "one of 'project_id' or 'task_ids' is required", "project_id");
    try {
      return project_task_ids(dataset, *project);
    } catch (const std::out_of_range& e) {
      throw ApiError(404, e.what(), "project_id");
    }
  }

  HttpResponse post_datasets(const std::string& body, const std::string& content_type) {
    Dataset dataset;
    try {
      if (content_type.find("csv") != std::string::npos) {
        dataset = parse_csv_dataset(body, options.config.ingest);
      } else {
        const json doc = parse_body(body);
        const json& tasks = doc.is_object() && doc.contains("tasks") ? doc["tasks"] : doc;
        dataset = parse_json_dataset(tasks, options.config.ingest);
      }
    } catch (const DatasetError& e) {
      return reply(400, task_error_body(e));
    } catch (const std::invalid_argument& e) {
      return error_reply(400, e.what());
    }
    const auto count = dataset.tasks.size();
    const auto id = register_dataset(std::move(dataset));
    return reply(201, {{"dataset_id", id}, {"task_count", count}});
  }

  HttpResponse post_models(const std::string& body) {
    const json doc = parse_body(body);
    if (doc.is_object() && doc.contains("train")) {
      const json& request = doc["train"];
      if (!request.is_object()) throw ApiError(400, "field 'train' must be an object", "train");
      auto [dataset_id, entry] = dataset_for(request);
      TrainConfig cfg = options.config.train;
      if (auto seed = optional_integer(request, "seed")) cfg.seed = static_cast<std::uint64_t>(*seed);
      if (auto epochs = optional_integer(request, "max_epochs")) {
        if (*epochs < 1) throw ApiError(400, "field 'max_epochs' must be >= 1", "max_epochs");
        cfg.max_epochs = static_cast<std::size_t>(*epochs);
      }
      TrainResult trained = [&] {
        try {
          return train(build_labeled_set(*entry.dataset, entry.similarity, options.config.platform, cfg.target), cfg);
        } catch (const TrainingError& e) {
          throw ApiError(422, e.what());
        } catch (const std::invalid_argument& e) {
          throw ApiError(400, e.what());
        }
      }();
      const auto id = register_model(trained.model);
      json out = to_json(trained);
      out["model_id"] = id;
      out["dataset_id"] = dataset_id;
      return reply(201, out);
    }
    MlpModel model = [&] {
      try {
        return model_from_json(doc.is_object() && doc.contains("model") ? doc["model"] : doc);
      } catch (const std::invalid_argument& e) {
        throw ApiError(400, e.what());
      }
    }();
    const auto id = register_model(std::move(model));
    return reply(201, {{"model_id", id}});
  }

  HttpResponse post_predict(const std::string& body) {
    const json doc = parse_body(body);
    if (!doc.is_object()) throw ApiError(400, "request body must be a JSON object");
    if (doc.contains("features")) {
      const json& f = doc["features"];
      if (!f.is_object()) throw ApiError(400, "field 'features' must be an object", "features");
      FeatureVector x;
      try {
        x = make_features(number_field(f, "open_tasks", "features."), number_field(f, "avg_similarity", "features."),
                          number_field(f, "prize", "features."), number_field(f, "duration", "features."));
      } catch (const FeatureError& e) {
        throw ApiError(400, e.what(), "features." + e.feature());
      }
      auto [model_id, model] = model_for(doc);
      return reply(200, {{"model_id", model_id}, {"probability", model->forward(x)}});
    }

    auto [model_id, model] = model_for(doc);
    auto [dataset_id, entry] = dataset_for(doc);
    TaskRecord task;
    if (doc.contains("task")) {
      try {
        task = task_from_json(doc["task"]);
      } catch (const DatasetError& e) {
        throw ApiError(400, e.what(), e.field().empty() ? "task" : "task." + e.field());
      } catch (const std::invalid_argument& e) {
        throw ApiError(400, e.what(), "task");
      }
    } else {
      const auto& id = require(doc, "task_id");
      if (!id.is_string()) throw ApiError(400, "field 'task_id' must be a string", "task_id");
      const auto* found = entry.dataset->find(id.get<std::string>());
      if (found == nullptr) throw ApiError(404, "unknown task '" + id.get<std::string>() + "'", "task_id");
      task = *found;
    }
    if (auto day = optional_integer(doc, "day")) {
      if (*day < 0) throw ApiError(400, "field 'day' must be >= 0", "day");
      task = shifted(task, *day - task.registration_start);
    }
    const auto decision = recommend(task, *entry.pool, *model, entry.similarity, options.config.platform);
    json out = to_json(decision);
    out["p0"] = decision.predictions[0];
    out["p1"] = decision.predictions[1];
    out["p2"] = decision.predictions[2];
    out["model_id"] = model_id;
    out["dataset_id"] = dataset_id;
    return reply(200, out);
  }

  HttpResponse post_schedule(const std::string& body) {
    const json doc = parse_body(body);
    auto [model_id, model] = model_for(doc);
    auto [dataset_id, entry] = dataset_for(doc);
    ScheduleMode mode = ScheduleMode::static_mode;
    if (auto name = optional_string(doc, "mode")) {
      try {
        mode = schedule_mode_from_string(*name);
      } catch (const std::invalid_argument& e) {
        throw ApiError(400, e.what(), "mode");
      }
    }
    const auto ids = project_ids_for(doc, *entry.dataset);
    const std::string project = optional_string(doc, "project_id").value_or("");
    json out = to_json(schedule_project(inputs_for(entry, model), project, ids, mode));
    out["model_id"] = model_id;
    out["dataset_id"] = dataset_id;
    return reply(200, out);
  }

  static void apply_decision(Session& session, const json& doc) {
    const auto it = doc.find("offset");
    if (it == doc.end()) throw ApiError(400, "missing field 'offset'", "offset");
    if (!it->is_number_integer()) throw ApiError(400, "field 'offset' must be an integer", "offset");
    const auto offset = it->get<std::int64_t>();
    if (session.schedule.complete()) throw ApiError(409, "session is complete");
    if (auto cursor = optional_integer(doc, "cursor")) {
      if (*cursor != static_cast<std::int64_t>(session.schedule.cursor())) {
        throw ApiError(409, "decision for cursor " + std::to_string(*cursor) + " but session is at " +
                                std::to_string(session.schedule.cursor()),
                       "cursor");
      }
    }
    if (auto task_id = optional_string(doc, "task_id")) {
      const auto& expected = session.schedule.task_ids()[session.schedule.cursor()];
      if (*task_id != expected) {
        throw ApiError(409, "decision for task '" + *task_id + "' but the next task is '" + expected + "'", "task_id");
      }
    }
    if (offset < 0 || offset > 2) throw ApiError(422, "offset must be 0, 1 or 2", "offset");
    session.schedule.decide(static_cast<int>(offset));
  }

  HttpResponse post_sessions(const std::string& body) {
    const json doc = parse_body(body);
    auto [model_id, model] = model_for(doc);
    auto [dataset_id, entry] = dataset_for(doc);
    const auto ids = project_ids_for(doc, *entry.dataset);
    const std::string project = optional_string(doc, "project_id").value_or("");
    std::string id;
    {
      std::unique_lock lock(registry_mutex);
      id = "s" + std::to_string(next_session++);
    }
    auto session = std::make_shared<Session>(id, dataset_id, model_id,
                                             RollingSchedule(inputs_for(entry, model), project, ids));
    if (doc.contains("offsets")) {
      const auto& offsets = doc["offsets"];
      if (!offsets.is_array()) throw ApiError(400, "field 'offsets' must be an array", "offsets");
      for (const auto& o : offsets) apply_decision(*session, {{"offset", o}});
    }
    json view = session_view(*session);
    {
      std::unique_lock lock(registry_mutex);
      sessions.emplace(id, session);
    }
    return reply(201, view);
  }

  HttpResponse session_route(const std::string& method, const std::vector<std::string>& parts,
                             const std::string& body) {
    auto session = session_for(parts[1]);
    if (parts.size() == 2 && method == "GET") {
      std::lock_guard lock(session->mutex);
      return reply(200, session_view(*session));
    }
    if (parts.size() == 3 && parts[2] == "next" && method == "GET") {
      std::lock_guard lock(session->mutex);
      if (session->schedule.complete()) throw ApiError(409, "session is complete");
      const auto decision = session->schedule.next();
      const auto dataset = datasets_snapshot(session->dataset_id);
      json out = {{"session_id", session->id},
                  {"cursor", session->schedule.cursor()},
                  {"task_count", session->schedule.size()},
                  {"task_id", decision.task_id},
                  {"decision", to_json(decision)}};
      if (dataset) {
        if (const auto* t = dataset->find(decision.task_id)) out["task"] = to_json(*t);
      }
      return reply(200, out);
    }
    if (parts.size() == 3 && parts[2] == "decide" && method == "POST") {
      const json doc = parse_body(body);
      if (!doc.is_object()) throw ApiError(400, "request body must be a JSON object");
      std::lock_guard lock(session->mutex);
      apply_decision(*session, doc);
      return reply(200, session_view(*session));
    }
    if (parts.size() == 3 && parts[2] == "snapshot" && method == "POST") {
      std::lock_guard lock(session->mutex);
      json doc = session_view(*session);
      std::vector<int> offsets;
      for (const auto& d : session->schedule.decisions()) offsets.push_back(d.chosen_offset);
      doc["offsets"] = offsets;
      std::filesystem::create_directories(options.snapshot_dir);
      const auto path = options.snapshot_dir / ("session-" + session->id + ".json");
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw ApiError(500, "cannot write " + path.string());
      out << doc.dump(1) << '\n';
      return reply(200, {{"session_id", session->id}, {"path", path.string()}});
    }
    throw ApiError(404, "no route for " + method + " /" + parts[0] + "/" + parts[1] + (parts.size() > 2 ? "/" + parts[2] : ""));
  }

  std::shared_ptr<const Dataset> datasets_snapshot(const std::string& id) {
    std::shared_lock lock(registry_mutex);
    auto it = datasets.find(id);
    return it == datasets.end() ? nullptr : it->second.dataset;
  }

  HttpResponse healthz() {
    std::shared_lock lock(registry_mutex);
    return reply(200, {{"status", "ok"},
                       {"datasets", datasets.size()},
                       {"models", models.size()},
                       {"sessions", sessions.size()}});
  }

  HttpResponse route(const std::string& method, const std::string& path, const std::string& body,
                     const std::string& content_type) {
    try {
      const auto parts = split_path(path);
      if (parts.size() == 1 && parts[0] == "healthz" && method == "GET") return healthz();
      if (parts.size() == 1 && method == "POST") {
        if (parts[0] == "datasets") return post_datasets(body, content_type);
        if (parts[0] == "models") return post_models(body);
        if (parts[0] == "predict") return post_predict(body);
        if (parts[0] == "schedule") return post_schedule(body);
        if (parts[0] == "sessions") return post_sessions(body);
      }
      if (parts.size() >= 2 && parts.size() <= 3 && parts[0] == "sessions") return session_route(method, parts, body);
      return error_reply(404, "no route for " + method + " " + path);
    } catch (const ApiError& e) {
      return error_reply(e.status, e.what(), e.field);
    } catch (const FeatureError& e) {
      return error_reply(400, e.what(), e.feature());
    } catch (const std::exception& e) {
      return error_reply(500, e.what());
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const auto out = impl_->route(req.method, req.path, req.body, req.get_header_value("Content-Type"));
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  impl_->server.Get(".*", forward);
  impl_->server.Post(".*", forward);
}

Service::~Service() { stop(); }

std::string Service::add_dataset(Dataset dataset) { return impl_->register_dataset(std::move(dataset)); }

std::string Service::add_model(MlpModel model) { return impl_->register_model(std::move(model)); }

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body,
                             const std::string& content_type) {
  return impl_->route(method, path, body, content_type);
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

std::pair<std::string, int> parse_listen_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw std::invalid_argument("listen address must look like host:port, got '" + address + "'");
  }
  int port = 0;
  const char* first = address.data() + colon + 1;
  const char* last = address.data() + address.size();
  const auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || ptr != last || port < 0 || port > 65535) {
    throw std::invalid_argument("invalid port in listen address '" + address + "'");
  }
  return {address.substr(0, colon), port};
}

}  // namespace crowdsched

#include "crowdsched/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

#include <toml.hpp>

namespace crowdsched {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw std::invalid_argument("config key '" + key + "': " + what);
}

void check_keys(const toml::table& table, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : table) {
    bool known = false;
    for (auto a : allowed) known = known || key.str() == a;
    if (!known) fail(path.empty() ? std::string(key.str()) : path + "." + std::string(key.str()), "unknown key");
  }
}

const toml::table* subtable(const toml::table& table, std::string_view key, const std::string& path) {
  const auto* node = table.get(key);
  if (node == nullptr) return nullptr;
  const auto* sub = node->as_table();
  if (sub == nullptr) fail(path, "expected a table");
  return sub;
}

void read(const toml::table& t, std::string_view key, const std::string& path, double& out) {
  const auto* node = t.get(key);
  if (node == nullptr) return;
  if (auto v = node->value<double>()) {
    out = *v;
  } else {
    fail(path, "expected a number");
  }
}

template <typename T>
  requires std::is_unsigned_v<T>
void read(const toml::table& t, std::string_view key, const std::string& path, T& out) {
  const auto* node = t.get(key);
  if (node == nullptr) return;
  const auto* v = node->as_integer();
  if (v == nullptr || v->get() < 0) fail(path, "expected a non-negative integer");
  out = static_cast<T>(v->get());
}

void read(const toml::table& t, std::string_view key, const std::string& path, bool& out) {
  const auto* node = t.get(key);
  if (node == nullptr) return;
  const auto* v = node->as_boolean();
  if (v == nullptr) fail(path, "expected true or false");
  out = v->get();
}

std::optional<std::string> read_string(const toml::table& t, std::string_view key, const std::string& path) {
  const auto* node = t.get(key);
  if (node == nullptr) return std::nullopt;
  const auto* v = node->as_string();
  if (v == nullptr) fail(path, "expected a string");
  return v->get();
}

template <typename T>
void read_array(const toml::table& t, std::string_view key, const std::string& path, std::vector<T>& out) {
  const auto* node = t.get(key);
  if (node == nullptr) return;
  const auto* arr = node->as_array();
  if (arr == nullptr) fail(path, "expected an array");
  std::vector<T> values;
  for (const auto& item : *arr) {
    if constexpr (std::is_same_v<T, double>) {
      auto v = item.value<double>();
      if (!v) fail(path, "expected an array of numbers");
      values.push_back(*v);
    } else {
      const auto* v = item.as_integer();
      if (v == nullptr || v->get() < 0) fail(path, "expected an array of non-negative integers");
      values.push_back(static_cast<T>(v->get()));
    }
  }
  out = std::move(values);
}

template <typename Fn>
auto rethrow_as(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    fail(key, e.what());
  }
}

toml::table parse_toml(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML parse error at line " << e.source().begin.line << ", column " << e.source().begin.column << ": "
        << e.description();
    throw std::invalid_argument(msg.str());
  }
}

void read_weights(const toml::table& root, SimilarityWeights& weights) {
  const auto* sim = subtable(root, "similarity", "similarity");
  if (sim == nullptr) return;
  check_keys(*sim, "similarity", {"weights"});
  const auto* w = subtable(*sim, "weights", "similarity.weights");
  if (w == nullptr) return;
  check_keys(*w, "similarity.weights",
             {"prize", "registration_start", "submission_end", "type", "technology", "platform", "requirement_text"});
  std::array<double, kSimilarityFeatureCount> raw;
  raw.fill(1.0);
  for (std::size_t k = 0; k < kSimilarityFeatureCount; ++k) {
    read(*w, kSimilarityFeatureNames[k], "similarity.weights." + std::string(kSimilarityFeatureNames[k]), raw[k]);
  }
  weights = rethrow_as("similarity.weights", [&] { return SimilarityWeights::from_raw(raw); });
}

void read_platform(const toml::table& root, PlatformOptions& options) {
  const auto* p = subtable(root, "platform", "platform");
  if (p == nullptr) return;
  check_keys(*p, "platform", {"arrival_rate", "projection", "round_open_tasks"});
  if (auto v = read_string(*p, "arrival_rate", "platform.arrival_rate")) {
    if (*v == "registration_sum") {
      options.arrival_rate = ArrivalRateEstimator::registration_sum;
    } else if (*v == "littles_law") {
      options.arrival_rate = ArrivalRateEstimator::littles_law;
    } else {
      fail("platform.arrival_rate", "expected \"registration_sum\" or \"littles_law\"");
    }
  }
  if (auto v = read_string(*p, "projection", "platform.projection")) {
    if (*v == "survivors") {
      options.projection = ProjectionBase::survivors;
    } else if (*v == "full_count") {
      options.projection = ProjectionBase::full_count;
    } else {
      fail("platform.projection", "expected \"survivors\" or \"full_count\"");
    }
  }
  read(*p, "round_open_tasks", "platform.round_open_tasks", options.round_open_tasks);
}

void read_train(const toml::table& root, TrainConfig& cfg) {
  const auto* t = subtable(root, "train", "train");
  if (t == nullptr) return;
  check_keys(*t, "train",
             {"layer_dims", "hidden_activation", "batch_size", "max_epochs", "patience", "learning_rate", "momentum",
              "validation_fraction", "holdout_fraction", "kfold_k", "init_draws", "target", "seed"});
  read_array(*t, "layer_dims", "train.layer_dims", cfg.layer_dims);
  if (auto v = read_string(*t, "hidden_activation", "train.hidden_activation")) {
    cfg.hidden_activation = rethrow_as("train.hidden_activation", [&] { return activation_from_string(*v); });
  }
  read(*t, "batch_size", "train.batch_size", cfg.batch_size);
  read(*t, "max_epochs", "train.max_epochs", cfg.max_epochs);
  read(*t, "patience", "train.patience", cfg.patience);
  read(*t, "learning_rate", "train.learning_rate", cfg.learning_rate);
  read(*t, "momentum", "train.momentum", cfg.momentum);
  read(*t, "validation_fraction", "train.validation_fraction", cfg.validation_fraction);
  read(*t, "holdout_fraction", "train.holdout_fraction", cfg.holdout_fraction);
  read(*t, "kfold_k", "train.kfold_k", cfg.kfold_k);
  read(*t, "init_draws", "train.init_draws", cfg.init_draws);
  read(*t, "seed", "train.seed", cfg.seed);
  if (auto v = read_string(*t, "target", "train.target")) {
    if (*v == "task_label") {
      cfg.target = TrainingTarget::task_label;
    } else if (*v == "day_failure_rate") {
      cfg.target = TrainingTarget::day_failure_rate;
    } else {
      fail("train.target", "expected \"task_label\" or \"day_failure_rate\"");
    }
  }
  cfg.validate();
}

void read_eval(const toml::table& root, EvalConfig& cfg) {
  const auto* e = subtable(root, "eval", "eval");
  if (e == nullptr) return;
  check_keys(*e, "eval", {"moving_average_window", "pred_thresholds", "primary_threshold"});
  read(*e, "moving_average_window", "eval.moving_average_window", cfg.moving_average_window);
  read_array(*e, "pred_thresholds", "eval.pred_thresholds", cfg.pred_thresholds);
  read(*e, "primary_threshold", "eval.primary_threshold", cfg.primary_threshold);
  cfg.validate();
}

void read_ingest(const toml::table& root, LoadOptions& options) {
  const auto* i = subtable(root, "ingest", "ingest");
  if (i == nullptr) return;
  check_keys(*i, "ingest", {"exclude_cancelled"});
  read(*i, "exclude_cancelled", "ingest.exclude_cancelled", options.exclude_cancelled);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

EngineConfig parse_engine_config(std::string_view toml_text) {
  const auto root = parse_toml(toml_text);
  check_keys(root, "", {"similarity", "platform", "train", "eval", "ingest"});
  EngineConfig cfg;
  read_weights(root, cfg.weights);
  read_platform(root, cfg.platform);
  read_train(root, cfg.train);
  read_eval(root, cfg.eval);
  read_ingest(root, cfg.ingest);
  return cfg;
}

EngineConfig load_engine_config(const std::filesystem::path& path) { return parse_engine_config(read_file(path)); }

SyntheticSpec parse_synthetic_spec(std::string_view toml_text) {
  const auto root = parse_toml(toml_text);
  check_keys(root, "", {"synthetic", "similarity", "platform"});
  SyntheticSpec spec;
  read_weights(root, spec.weights);
  read_platform(root, spec.platform);
  if (const auto* s = subtable(root, "synthetic", "synthetic")) {
    check_keys(*s, "synthetic",
               {"task_count", "arrival_rate", "duration_mean", "duration_spread", "prize_mean", "prize_spread",
                "prize_min", "runnerup_probability", "technology_vocabulary", "max_technologies", "text_vocabulary",
                "project_count", "seed", "failure"});
    read(*s, "task_count", "synthetic.task_count", spec.task_count);
    read(*s, "arrival_rate", "synthetic.arrival_rate", spec.arrival_rate);
    read(*s, "duration_mean", "synthetic.duration_mean", spec.duration_mean);
    read(*s, "duration_spread", "synthetic.duration_spread", spec.duration_spread);
    read(*s, "prize_mean", "synthetic.prize_mean", spec.prize_mean);
    read(*s, "prize_spread", "synthetic.prize_spread", spec.prize_spread);
    read(*s, "prize_min", "synthetic.prize_min", spec.prize_min);
    read(*s, "runnerup_probability", "synthetic.runnerup_probability", spec.runnerup_probability);
    read(*s, "technology_vocabulary", "synthetic.technology_vocabulary", spec.technology_vocabulary);
    read(*s, "max_technologies", "synthetic.max_technologies", spec.max_technologies);
    read(*s, "text_vocabulary", "synthetic.text_vocabulary", spec.text_vocabulary);
    read(*s, "project_count", "synthetic.project_count", spec.project_count);
    read(*s, "seed", "synthetic.seed", spec.seed);
    if (const auto* f = subtable(*s, "failure", "synthetic.failure")) {
      check_keys(*f, "synthetic.failure",
                 {"kind", "constant", "floor", "ceiling", "mismatch_weight", "mismatch_offset", "open_tasks_weight",
                  "similarity_weight"});
      auto& phi = spec.failure;
      if (auto v = read_string(*f, "kind", "synthetic.failure.kind")) {
        if (*v == "constant") {
          phi.kind = FailureFunction::Kind::constant;
        } else if (*v == "planted") {
          phi.kind = FailureFunction::Kind::planted;
        } else {
          fail("synthetic.failure.kind", "expected \"constant\" or \"planted\"");
        }
      }
      read(*f, "constant", "synthetic.failure.constant", phi.constant);
      read(*f, "floor", "synthetic.failure.floor", phi.floor);
      read(*f, "ceiling", "synthetic.failure.ceiling", phi.ceiling);
      read(*f, "mismatch_weight", "synthetic.failure.mismatch_weight", phi.mismatch_weight);
      read(*f, "mismatch_offset", "synthetic.failure.mismatch_offset", phi.mismatch_offset);
      read(*f, "open_tasks_weight", "synthetic.failure.open_tasks_weight", phi.open_tasks_weight);
      read(*f, "similarity_weight", "synthetic.failure.similarity_weight", phi.similarity_weight);
    }
  }
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  return parse_synthetic_spec(read_file(path));
}

}  // namespace crowdsched

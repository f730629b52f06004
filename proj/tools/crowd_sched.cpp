// crowd-sched: synthetic data, training, evaluation, scheduling and the HTTP service.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crowdsched/compare.hpp"
#include "crowdsched/config.hpp"
#include "crowdsched/features.hpp"
#include "crowdsched/mlp.hpp"
#include "crowdsched/platform_state.hpp"
#include "crowdsched/scheduler.hpp"
#include "crowdsched/service.hpp"
#include "crowdsched/synthetic.hpp"
#include "crowdsched/training.hpp"

using namespace crowdsched;
using nlohmann::json;

namespace {

EngineConfig engine_config(const std::string& path) { return path.empty() ? EngineConfig{} : load_engine_config(path); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void emit(const json& doc, const std::string& out_path) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

SimilarityModel similarity_for(const Dataset& dataset, const EngineConfig& cfg) {
  return {cfg.weights, SimilarityContext::from_tasks(dataset.tasks)};
}

LabeledSet labeled(const Dataset& dataset, const EngineConfig& cfg) {
  return build_labeled_set(dataset, similarity_for(dataset, cfg), cfg.platform, cfg.train.target);
}

Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Failure prediction and posting-day scheduling for crowdsourced tasks"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and its ground-truth sidecar");
  std::string spec_path, synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_tasks;
  synth->add_option("--spec", spec_path, "Synthetic spec (TOML); defaults apply when omitted");
  synth->add_option("--out", synth_out, "Dataset path (.csv or .json)")->required();
  synth->add_option("--seed", synth_seed, "Override the spec seed");
  synth->add_option("--tasks", synth_tasks, "Override the task count");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the failure predictor");
  std::string train_dataset, train_config, train_out, train_curve;
  bool train_holdout = false;
  train_cmd->add_option("--dataset", train_dataset)->required();
  train_cmd->add_option("--config", train_config, "Engine config (TOML)");
  train_cmd->add_option("--out", train_out, "Model file")->required();
  train_cmd->add_option("--curve", train_curve, "Write the training curve JSON here");
  train_cmd->add_flag("--holdout", train_holdout, "Train on the 80% group and report the holdout loss");

  // crossval
  auto* cv_cmd = app.add_subcommand("crossval", "Holdout split plus K-fold cross-validation");
  std::string cv_dataset, cv_config, cv_out;
  std::optional<std::size_t> cv_k;
  bool cv_holdout = false;
  cv_cmd->add_option("--dataset", cv_dataset)->required();
  cv_cmd->add_option("--config", cv_config);
  cv_cmd->add_option("--k", cv_k, "Number of folds");
  cv_cmd->add_option("--out", cv_out, "Write the report here instead of stdout");
  cv_cmd->add_flag("--score-holdout", cv_holdout, "Also train on the whole group and score the holdout");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Compare the network against the baselines");
  std::string eval_dataset, eval_config, eval_out, eval_csv;
  eval_cmd->add_option("--dataset", eval_dataset)->required();
  eval_cmd->add_option("--config", eval_config);
  eval_cmd->add_option("--out", eval_out, "Metrics JSON path (stdout when omitted)");
  eval_cmd->add_option("--csv", eval_csv, "Comparison table CSV path");

  // snapshot
  auto* snap_cmd = app.add_subcommand("snapshot", "Platform state on one day");
  std::string snap_dataset, snap_config, snap_task;
  Day snap_day = 0;
  snap_cmd->add_option("--dataset", snap_dataset)->required();
  snap_cmd->add_option("--day", snap_day)->required();
  snap_cmd->add_option("--config", snap_config);
  snap_cmd->add_option("--task", snap_task, "Arriving task; similarity is measured against it");

  // schedule
  auto* sched_cmd = app.add_subcommand("schedule", "Recommend posting days for a project");
  std::string sched_dataset, sched_model, sched_project, sched_mode = "static", sched_config, sched_out, sched_csv,
                                                          sched_plot;
  sched_cmd->add_option("--dataset", sched_dataset)->required();
  sched_cmd->add_option("--model", sched_model)->required();
  sched_cmd->add_option("--project", sched_project, "Project id, or a dataset file holding the project's tasks")
      ->required();
  sched_cmd->add_option("--mode", sched_mode)->check(CLI::IsMember({"static", "rolling"}));
  sched_cmd->add_option("--config", sched_config);
  sched_cmd->add_option("--out", sched_out, "Schedule JSON path (stdout when omitted)");
  sched_cmd->add_option("--csv", sched_csv, "Per-task CSV path");
  sched_cmd->add_option("--plot", sched_plot, "Directory for plot data files");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  const char* env_listen = std::getenv("CROWD_SCHED_LISTEN");
  std::string listen = env_listen != nullptr && *env_listen != '\0' ? env_listen : "127.0.0.1:8080";
  std::string serve_config, serve_dataset, serve_model, snapshot_dir = ".";
  serve_cmd->add_option("--listen", listen, "host:port (default $CROWD_SCHED_LISTEN or 127.0.0.1:8080)");
  serve_cmd->add_option("--config", serve_config);
  serve_cmd->add_option("--dataset", serve_dataset, "Dataset to preload");
  serve_cmd->add_option("--model", serve_model, "Model to preload");
  serve_cmd->add_option("--snapshot-dir", snapshot_dir, "Where session snapshots are written");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : load_synthetic_spec(spec_path);
      if (synth_seed) spec.seed = *synth_seed;
      if (synth_tasks) spec.task_count = *synth_tasks;
      const auto corpus = generate_synthetic(spec);
      save_synthetic(corpus, synth_out);
      double phi = 0.0;
      std::size_t failed = 0;
      for (const auto& row : corpus.truth) phi += row.phi;
      for (const auto& t : corpus.dataset.tasks) failed += task_outcome(t).failed ? 1 : 0;
      double open = 0.0;
      for (const auto& row : corpus.truth) open += row.features.open_tasks;
      const double n = static_cast<double>(corpus.truth.size());
      emit({{"dataset", synth_out},
            {"truth", truth_path_for(synth_out).string()},
            {"task_count", corpus.dataset.tasks.size()},
            {"failure_ratio", static_cast<double>(failed) / n},
            {"mean_phi", phi / n},
            {"mean_open_tasks", open / n},
            {"arrival_rate", dataset_arrival_rate(corpus.dataset.tasks)}},
           "");
    } else if (train_cmd->parsed()) {
      const auto cfg = engine_config(train_config);
      const auto dataset = load_dataset(train_dataset, cfg.ingest);
      const auto data = labeled(dataset, cfg);
      json summary;
      TrainResult result = [&] {
        if (!train_holdout) return train(data, cfg.train);
        const auto split = holdout_split(data, cfg.train.holdout_fraction, cfg.train.seed);
        auto r = train(data.subset(split.group), cfg.train);
        summary["holdout_loss"] = evaluate_mse(r.model, data, split.holdout);
        summary["holdout_size"] = split.holdout.size();
        return r;
      }();
      save_model(result.model, train_out);
      if (!train_curve.empty()) emit(to_json(result), train_curve);
      summary["model"] = train_out;
      summary["best_epoch"] = result.best_epoch;
      summary["best_validation_loss"] = result.best_validation_loss;
      summary["stopped_early"] = result.stopped_early;
      summary["epochs_run"] = result.curve.size();
      emit(summary, "");
    } else if (cv_cmd->parsed()) {
      auto cfg = engine_config(cv_config);
      if (cv_k) cfg.train.kfold_k = *cv_k;
      const auto dataset = load_dataset(cv_dataset, cfg.ingest);
      emit(to_json(kfold_cv(labeled(dataset, cfg), cfg.train, cv_holdout)), cv_out);
    } else if (eval_cmd->parsed()) {
      const auto cfg = engine_config(eval_config);
      const auto dataset = load_dataset(eval_dataset, cfg.ingest);
      const auto report = compare_predictors(labeled(dataset, cfg), cfg.train, cfg.eval);
      emit(to_json(report), eval_out);
      if (!eval_csv.empty()) write_text(eval_csv, comparison_table_csv(report));
    } else if (snap_cmd->parsed()) {
      const auto cfg = engine_config(snap_config);
      const auto dataset = load_dataset(snap_dataset, cfg.ingest);
      const auto similarity = similarity_for(dataset, cfg);
      const TaskPool pool(dataset.tasks);
      json doc;
      std::optional<DayState> state;
      if (snap_task.empty()) {
        state.emplace(pool, snap_day, cfg.platform);
      } else {
        const auto* task = dataset.find(snap_task);
        if (task == nullptr) throw std::invalid_argument("unknown task '" + snap_task + "'");
        state.emplace(pool, *task, snap_day, similarity, cfg.platform);
        doc["task_id"] = snap_task;
      }
      const auto snap = state->snapshot();
      doc["day"] = snap.day;
      doc["not_d"] = snap.not_d;
      doc["ats_d"] = snap_task.empty() ? mean_pairwise_similarity_on(pool, snap_day, similarity) : snap.ats_d;
      doc["ta_d"] = snap.ta_d;
      doc["tf_d"] = snap.tf_d;
      doc["open_tasks"] = snap.open_tasks;
      json projections = json::array();
      for (int delta : {1, 2}) {
        const auto p = state->project(delta);
        json entry = {{"delta_days", delta}, {"ot_fut", p.ot_fut}, {"survivors", p.survivors}};
        if (!snap_task.empty()) entry["ats_fut"] = p.ats_fut;
        projections.push_back(entry);
      }
      doc["projections"] = projections;
      emit(doc, "");
    } else if (sched_cmd->parsed()) {
      const auto cfg = engine_config(sched_config);
      auto dataset = load_dataset(sched_dataset, cfg.ingest);
      std::vector<std::string> ids;
      std::string project_id = sched_project;
      if (std::filesystem::is_regular_file(sched_project)) {
        const auto project = load_dataset(sched_project, cfg.ingest);
        dataset = merge_project(dataset, project);
        for (const auto& t : project.tasks) ids.push_back(t.task_id);
        project_id = std::filesystem::path(sched_project).stem().string();
      } else {
        ids = project_task_ids(dataset, sched_project);
      }
      auto shared = std::make_shared<const Dataset>(std::move(dataset));
      ScheduleInputs inputs{shared, std::make_shared<const MlpModel>(load_model(sched_model)),
                            similarity_for(*shared, cfg), cfg.platform};
      const auto schedule = schedule_project(inputs, project_id, ids, schedule_mode_from_string(sched_mode));
      emit(to_json(schedule), sched_out);
      if (!sched_csv.empty()) write_text(sched_csv, decisions_to_csv(schedule));
      if (!sched_plot.empty()) write_plot_data(schedule, *shared, sched_plot);
    } else if (serve_cmd->parsed()) {
      ServiceOptions options{engine_config(serve_config), snapshot_dir};
      Service service(options);
      if (!serve_dataset.empty()) service.add_dataset(load_dataset(serve_dataset, options.config.ingest));
      if (!serve_model.empty()) service.add_model(load_model(serve_model));
      const auto [host, port] = parse_listen_address(listen);
      const int bound = service.bind(host, port);
      std::cerr << "listening on " << host << ':' << bound << std::endl;
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      service.run();
      g_service = nullptr;
    }
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

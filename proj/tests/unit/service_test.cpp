#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "crowdsched/scheduler.hpp"
#include "crowdsched/service.hpp"
#include "support.hpp"

namespace crowdsched {
namespace {

using nlohmann::json;

const MlpModel& trained_model() {
  static const MlpModel model = [] {
    const auto& corpus = testing::small_corpus();
    const SimilarityModel sim{SimilarityWeights{}, SimilarityContext::from_tasks(corpus.dataset.tasks)};
    TrainConfig cfg;
    cfg.max_epochs = 10;
    return train(build_labeled_set(corpus.dataset, sim), cfg).model;
  }();
  return model;
}

/// Project with the most tasks in the small corpus.
std::string busiest_project() {
  std::map<std::string, int> counts;
  for (const auto& t : testing::small_corpus().dataset.tasks) ++counts[t.project_id];
  return std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
}

class ServiceTest : public ::testing::Test {
 protected:
  ServiceTest() : dir_("service"), service_(ServiceOptions{EngineConfig{}, dir_.path()}) {}

  void load() {
    service_.add_dataset(testing::small_corpus().dataset);
    service_.add_model(trained_model());
  }

  json call(const std::string& method, const std::string& path, const json& body, int expect) {
    const auto r = service_.handle(method, path, body.is_null() ? "" : body.dump());
    EXPECT_EQ(r.status, expect) << method << ' ' << path << ": " << r.body;
    return json::parse(r.body);
  }

  ScheduleInputs inputs() const {
    const auto& ds = testing::small_corpus().dataset;
    return {std::make_shared<const Dataset>(ds), std::make_shared<const MlpModel>(trained_model()),
            SimilarityModel{SimilarityWeights{}, SimilarityContext::from_tasks(ds.tasks)}, PlatformOptions{}};
  }

  testing::TempDir dir_;
  Service service_;
};

TEST_F(ServiceTest, HealthzAndUnknownRoutes) {
  const auto h = call("GET", "/healthz", nullptr, 200);
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["datasets"], 0);
  call("GET", "/nowhere", nullptr, 404);
  call("GET", "/sessions/s9", nullptr, 404);
}

TEST_F(ServiceTest, NoModelGives503) {
  service_.add_dataset(testing::small_corpus().dataset);
  const auto e = call("POST", "/predict", {{"task_id", "T00001"}}, 503);
  EXPECT_EQ(e["field"], "model_id");
  call("POST", "/schedule", {{"project_id", busiest_project()}}, 503);
  call("POST", "/sessions", {{"project_id", busiest_project()}}, 503);
}

TEST_F(ServiceTest, DatasetUploadReportsRowsAndIds) {
  const auto csv = to_csv(testing::small_corpus().dataset);
  const auto ok = service_.handle("POST", "/datasets", csv, "text/csv");
  EXPECT_EQ(ok.status, 201);
  EXPECT_EQ(json::parse(ok.body)["task_count"], 600);
  EXPECT_EQ(json::parse(ok.body)["dataset_id"], "d1");

  Dataset bad;
  bad.tasks = {testing::make_task("A", 0, 5, 6), testing::make_task("A", 1, 5, 6)};
  const auto dup = service_.handle("POST", "/datasets", to_json(bad).dump());
  EXPECT_EQ(dup.status, 400);
  EXPECT_EQ(json::parse(dup.body)["task_ids"], json::array({"A"}));

  std::string broken = csv;
  const auto third_line = broken.find('\n', broken.find('\n') + 1) + 1;
  broken.insert(third_line, "T99999,x,y\n");
  const auto row = service_.handle("POST", "/datasets", broken, "text/csv");
  EXPECT_EQ(row.status, 400);
  EXPECT_EQ(json::parse(row.body)["row"], 3) << row.body;
  EXPECT_EQ(service_.handle("POST", "/datasets", "{not json").status, 400);
}

TEST_F(ServiceTest, PredictFeaturesMatchesModel) {
  load();
  const auto out = call("POST", "/predict",
                        {{"features", {{"open_tasks", 180}, {"avg_similarity", 0.4}, {"prize", 700}, {"duration", 12}}}},
                        200);
  EXPECT_EQ(out["probability"].get<double>(), trained_model().forward({180, 0.4, 700, 12}));
  const auto bad = call("POST", "/predict",
                        {{"features", {{"open_tasks", -1}, {"avg_similarity", 0.4}, {"prize", 700}, {"duration", 12}}}},
                        400);
  EXPECT_EQ(bad["field"], "features.open_tasks");
  call("POST", "/predict", {{"features", {{"open_tasks", 1}}}}, 400);
}

TEST_F(ServiceTest, PredictAgreesWithStaticScheduleAndRepeats) {
  load();
  const auto project = busiest_project();
  const auto& ds = testing::small_corpus().dataset;
  const auto ids = project_task_ids(ds, project);
  const auto expected = schedule_project(inputs(), project, ids, ScheduleMode::static_mode);
  const auto sched = call("POST", "/schedule", {{"project_id", project}}, 200);
  auto stripped = sched;
  stripped.erase("model_id");
  stripped.erase("dataset_id");
  EXPECT_EQ(stripped.dump(), to_json(expected).dump());
  EXPECT_EQ(call("POST", "/schedule", {{"project_id", project}}, 200).dump(), sched.dump());

  for (const auto& d : expected.decisions) {
    const auto p = call("POST", "/predict", {{"task_id", d.task_id}}, 200);
    EXPECT_EQ(p["p0"].get<double>(), d.predictions[0]);
    EXPECT_EQ(p["p1"].get<double>(), d.predictions[1]);
    EXPECT_EQ(p["p2"].get<double>(), d.predictions[2]);
    EXPECT_EQ(p["recommended_offset"], d.recommended_offset);
  }
  call("POST", "/predict", {{"task_id", "nope"}}, 404);
  call("POST", "/schedule", {{"project_id", "P9999"}}, 404);
  call("POST", "/schedule", {{"project_id", project}, {"mode", "sometimes"}}, 400);
  call("POST", "/schedule", {{"project_id", project}, {"model_id", "m7"}}, 404);
}

TEST_F(ServiceTest, SessionArgminWalkEqualsRollingSchedule) {
  load();
  const auto project = busiest_project();
  const auto ids = project_task_ids(testing::small_corpus().dataset, project);
  const auto rolling = schedule_project(inputs(), project, ids, ScheduleMode::rolling);

  auto view = call("POST", "/sessions", {{"project_id", project}}, 201);
  const std::string sid = view["session_id"];
  EXPECT_EQ(view["cursor"], 0);
  EXPECT_EQ(view["task_count"], ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto next = call("GET", "/sessions/" + sid + "/next", nullptr, 200);
    EXPECT_EQ(next["task_id"], ids[i]);
    EXPECT_EQ(next["decision"]["predictions"], json(rolling.decisions[i].predictions));
    view = call("POST", "/sessions/" + sid + "/decide",
                {{"offset", next["decision"]["recommended_offset"]}, {"cursor", i}, {"task_id", ids[i]}}, 200);
  }
  EXPECT_TRUE(view["complete"].get<bool>());
  EXPECT_EQ(view["schedule"].dump(), to_json(rolling).dump());
  call("GET", "/sessions/" + sid + "/next", nullptr, 409);
  call("POST", "/sessions/" + sid + "/decide", {{"offset", 0}}, 409);
}

TEST_F(ServiceTest, ZeroOffsetsReproduceBaseline) {
  load();
  const auto project = busiest_project();
  const auto ids = project_task_ids(testing::small_corpus().dataset, project);
  const auto view = call("POST", "/sessions", {{"project_id", project}, {"offsets", std::vector<int>(ids.size(), 0)}}, 201);
  const auto& s = view["schedule"];
  EXPECT_EQ(s["mean_after"], s["mean_before"]);
  EXPECT_EQ(s["makespan_after"], s["makespan_before"]);
  const auto baseline = schedule_project(inputs(), project, ids, ScheduleMode::static_mode);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    EXPECT_EQ(s["decisions"][i]["predictions"][0].get<double>(), baseline.decisions[i].predictions[0]);
  }
}

TEST_F(ServiceTest, DecisionErrorsAndIsolation) {
  load();
  const auto project = busiest_project();
  const auto ids = project_task_ids(testing::small_corpus().dataset, project);
  const std::string a = call("POST", "/sessions", {{"project_id", project}}, 201)["session_id"];
  const std::string b = call("POST", "/sessions", {{"project_id", project}}, 201)["session_id"];
  EXPECT_NE(a, b);

  EXPECT_EQ(call("POST", "/sessions/" + a + "/decide", {{"offset", 3}}, 422)["field"], "offset");
  call("POST", "/sessions/" + a + "/decide", {{"offset", -1}}, 422);
  call("POST", "/sessions/" + a + "/decide", {{"offset", "1"}}, 400);
  call("POST", "/sessions/" + a + "/decide", json::object(), 400);
  call("POST", "/sessions/" + a + "/decide", {{"offset", 1}, {"cursor", 4}}, 409);
  call("POST", "/sessions/" + a + "/decide", {{"offset", 1}, {"task_id", ids[1]}}, 409);
  EXPECT_EQ(service_.handle("POST", "/sessions/" + a + "/decide", "{oops").status, 400);

  call("POST", "/sessions/" + a + "/decide", {{"offset", 2}}, 200);
  EXPECT_EQ(call("GET", "/sessions/" + a, nullptr, 200)["cursor"], 1);
  EXPECT_EQ(call("GET", "/sessions/" + b, nullptr, 200)["cursor"], 0);
}

TEST_F(ServiceTest, ReplayAndSnapshot) {
  load();
  const auto project = busiest_project();
  const std::string sid = call("POST", "/sessions", {{"project_id", project}}, 201)["session_id"];
  const std::vector<int> offsets = {1, 0, 2, 2, 0};
  for (int o : offsets) call("POST", "/sessions/" + sid + "/decide", {{"offset", o}}, 200);
  const auto live = call("GET", "/sessions/" + sid, nullptr, 200);

  const auto snap = call("POST", "/sessions/" + sid + "/snapshot", json::object(), 200);
  std::ifstream in(snap["path"].get<std::string>());
  ASSERT_TRUE(in.good());
  const auto saved = json::parse(in);
  EXPECT_EQ(saved["offsets"], json(offsets));
  EXPECT_EQ(saved["schedule"], live["schedule"]);

  auto replayed = call("POST", "/sessions", {{"project_id", project}, {"offsets", saved["offsets"]}}, 201);
  EXPECT_EQ(replayed["schedule"].dump(), live["schedule"].dump());
  EXPECT_EQ(replayed["cursor"], offsets.size());
  call("POST", "/sessions", {{"project_id", project}, {"offsets", {0, 5}}}, 422);
}

TEST_F(ServiceTest, TrainAndUploadModels) {
  service_.add_dataset(testing::small_corpus().dataset);
  const auto trained = call("POST", "/models", {{"train", {{"dataset_id", "d1"}, {"seed", 5}, {"max_epochs", 2}}}}, 201);
  EXPECT_EQ(trained["model_id"], "m1");
  call("POST", "/models", {{"train", {{"max_epochs", 0}}}}, 400);
  const auto uploaded = call("POST", "/models", model_to_json(trained_model()), 201);
  EXPECT_EQ(uploaded["model_id"], "m2");
  call("POST", "/models", json{{"version", 99}}, 400);
  const auto p = call("POST", "/predict",
                      {{"model_id", "m2"},
                       {"features", {{"open_tasks", 10}, {"avg_similarity", 0.1}, {"prize", 100}, {"duration", 5}}}},
                      200);
  EXPECT_EQ(p["probability"].get<double>(), trained_model().forward({10, 0.1, 100, 5}));
}

TEST_F(ServiceTest, ServesOverHttp) {
  load();
  const int port = service_.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread server([this] { service_.run(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 50; ++i) {
    if (auto r = client.Get("/healthz"); r && r->status == 200) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  const auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  const json body = {{"project_id", busiest_project()}};
  const auto over_http = client.Post("/schedule", body.dump(), "application/json");
  ASSERT_TRUE(over_http);
  EXPECT_EQ(over_http->status, 200);
  EXPECT_EQ(over_http->body, service_.handle("POST", "/schedule", body.dump()).body);

  const auto missing = client.Post("/sessions/s42/decide", R"({"offset":1})", "application/json");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  service_.stop();
  server.join();
}

TEST(ListenAddress, Parsing) {
  EXPECT_EQ(parse_listen_address("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_THROW(parse_listen_address("localhost"), std::invalid_argument);
  EXPECT_THROW(parse_listen_address("h:99999"), std::invalid_argument);
  EXPECT_THROW(parse_listen_address("h:8x"), std::invalid_argument);
}

}  // namespace
}  // namespace crowdsched

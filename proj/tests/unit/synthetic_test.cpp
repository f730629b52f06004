#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "crowdsched/platform_state.hpp"
#include "crowdsched/synthetic.hpp"
#include "support.hpp"

namespace crowdsched {
namespace {

SyntheticSpec small_spec(std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.task_count = 1500;
  spec.project_count = 60;
  spec.seed = seed;
  return spec;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Synthetic, SameSeedGivesByteIdenticalFiles) {
  const testing::TempDir dir("synth");
  save_synthetic(generate_synthetic(small_spec()), dir.path() / "a.csv");
  save_synthetic(generate_synthetic(small_spec()), dir.path() / "b.csv");
  EXPECT_EQ(slurp(dir.path() / "a.csv"), slurp(dir.path() / "b.csv"));
  EXPECT_EQ(slurp(dir.path() / "a.truth.csv"), slurp(dir.path() / "b.truth.csv"));
  EXPECT_FALSE(slurp(dir.path() / "a.truth.csv").empty());
  EXPECT_NE(to_csv(generate_synthetic(small_spec(6)).dataset), slurp(dir.path() / "a.csv"));
}

TEST(Synthetic, RecordsAreValidAndPhiInUnitInterval) {
  const auto corpus = generate_synthetic(small_spec());
  ASSERT_EQ(corpus.dataset.tasks.size(), 1500u);
  ASSERT_EQ(corpus.truth.size(), 1500u);
  EXPECT_NO_THROW(validate_dataset(corpus.dataset));
  for (std::size_t i = 0; i < corpus.truth.size(); ++i) {
    EXPECT_EQ(corpus.truth[i].task_id, corpus.dataset.tasks[i].task_id);
    EXPECT_GE(corpus.truth[i].phi, 0.0);
    EXPECT_LE(corpus.truth[i].phi, 1.0);
    EXPECT_FALSE(corpus.dataset.tasks[i].project_id.empty());
  }
}

TEST(Synthetic, DefaultCorpusSizeAndArrivalRate) {
  const auto corpus = generate_synthetic(SyntheticSpec{});
  EXPECT_EQ(corpus.dataset.tasks.size(), 4908u);
  // Roughly 13 arrivals per day across the dataset.
  const double days = static_cast<double>(corpus.dataset.tasks.back().registration_start + 1);
  EXPECT_NEAR(static_cast<double>(corpus.dataset.tasks.size()) / days, 13.0, 0.5);
}

TEST(Synthetic, DailyArrivalsArePoissonWithRateLambda) {
  auto spec = small_spec();
  spec.task_count = 13 * 300;
  const auto corpus = generate_synthetic(spec);
  std::map<Day, int> per_day;
  for (const auto& t : corpus.dataset.tasks) ++per_day[t.registration_start];
  // Drop the last day: it is truncated by task_count.
  const Day last = corpus.dataset.tasks.back().registration_start;
  double sum = 0, n = 0;
  for (Day d = 0; d < last; ++d) {
    sum += per_day.count(d) ? per_day[d] : 0;
    ++n;
  }
  ASSERT_GE(n, 100);
  const double mean = sum / n;
  EXPECT_LE(std::fabs(mean - 13.0), 3.0 * std::sqrt(13.0 / n));
}

TEST(Synthetic, LongRunOpenCountNearLambdaTimesLifetime) {
  SyntheticSpec spec;  // lambda 13, mean duration 14
  const auto corpus = generate_synthetic(spec);
  const TaskPool pool(corpus.dataset.tasks);
  const Day last = corpus.dataset.tasks.back().registration_start;
  double sum = 0, n = 0;
  for (Day d = 40; d + 40 <= last; ++d) {
    sum += static_cast<double>(open_tasks_on(pool, d).size());
    ++n;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 13.0 * 14.0, 0.1 * 13.0 * 14.0);
  // Little's law: a task is open on both ends of its registration window.
  double window = 0;
  for (const auto& t : corpus.dataset.tasks) window += static_cast<double>(t.registration_end - t.registration_start + 1);
  window /= static_cast<double>(corpus.dataset.tasks.size());
  EXPECT_NEAR(mean, 13.0 * window, 0.03 * 13.0 * window);
}

TEST(Synthetic, DurationMeanFollowsSpec) {
  auto spec = small_spec();
  spec.duration_mean = 8.0;
  spec.duration_spread = 3.0;
  const auto corpus = generate_synthetic(spec);
  std::map<std::string, std::pair<double, int>> per_project;
  double sum = 0;
  for (const auto& t : corpus.dataset.tasks) {
    sum += static_cast<double>(task_duration(t));
    auto& p = per_project[t.project_id];
    p.first += static_cast<double>(task_duration(t));
    ++p.second;
  }
  EXPECT_NEAR(sum / static_cast<double>(corpus.dataset.tasks.size()), 8.0, 0.25);
  // The largest project also averages about 8 days per task.
  auto largest = per_project.begin();
  for (auto it = per_project.begin(); it != per_project.end(); ++it) {
    if (it->second.second > largest->second.second) largest = it;
  }
  ASSERT_GE(largest->second.second, 30);
  EXPECT_NEAR(largest->second.first / largest->second.second, 8.0, 1.5);
}

TEST(Synthetic, ConstantPhiGivesMatchingFailureRatio) {
  SyntheticSpec spec;
  spec.task_count = 5000;
  spec.failure.kind = FailureFunction::Kind::constant;
  spec.failure.constant = 0.75;
  const auto corpus = generate_synthetic(spec);
  double failed = 0;
  for (const auto& t : corpus.dataset.tasks) failed += task_outcome(t).failed ? 1 : 0;
  EXPECT_NEAR(failed / 5000.0, 0.75, 0.02);
  for (const auto& row : corpus.truth) EXPECT_EQ(row.phi, 0.75);
}

TEST(Synthetic, OutcomeCountsAreConsistent) {
  const auto corpus = generate_synthetic(small_spec());
  for (const auto& t : corpus.dataset.tasks) {
    EXPECT_GE(t.registrations, 1);
    EXPECT_LE(t.submissions, t.registrations);
    EXPECT_LE(t.valid_submissions, t.submissions);
  }
}

TEST(Synthetic, PlantedPhiIsNonlinearAndBounded) {
  FailureFunction phi;
  EXPECT_NEAR(phi.evaluate({0, 0, 0, 0}), phi.floor, 1e-4);  // deep in the low region
  EXPECT_NEAR(phi.evaluate({0, 0, 3, -3}), phi.ceiling, 1e-4);
  // Symmetric in the prize/duration mismatch.
  EXPECT_DOUBLE_EQ(phi.evaluate({0.3, -0.2, 1.5, 0}), phi.evaluate({0.3, -0.2, 0, 1.5}));
  FailureFunction c;
  c.kind = FailureFunction::Kind::constant;
  c.constant = 0.3;
  EXPECT_EQ(c.evaluate({5, 5, 5, 5}), 0.3);
}

TEST(Synthetic, InvalidSpecsAreRejected) {
  auto bad = [](auto mutate) {
    SyntheticSpec spec;
    mutate(spec);
    EXPECT_THROW(generate_synthetic(spec), std::invalid_argument);
  };
  bad([](SyntheticSpec& s) { s.task_count = 0; });
  bad([](SyntheticSpec& s) { s.arrival_rate = 0; });
  bad([](SyntheticSpec& s) { s.runnerup_probability = 1.5; });
  bad([](SyntheticSpec& s) {
    s.failure.kind = FailureFunction::Kind::constant;
    s.failure.constant = -0.1;
  });
  bad([](SyntheticSpec& s) { s.failure.floor = 0.9, s.failure.ceiling = 0.1; });
  bad([](SyntheticSpec& s) { s.text_vocabulary = 0; });
}

TEST(Synthetic, TruthSidecarPathAndHeader) {
  EXPECT_EQ(truth_path_for("/x/data.csv"), std::filesystem::path("/x/data.truth.csv"));
  EXPECT_EQ(truth_path_for("d.json"), std::filesystem::path("d.truth.csv"));
  const auto csv = truth_to_csv({{"T1", 0.25, {1, 0.5, 100, 7}}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')).rfind("task_id,phi,", 0), 0u);
  EXPECT_NE(csv.find("T1,0.25,1,0.5,100,7"), std::string::npos);
}

}  // namespace
}  // namespace crowdsched

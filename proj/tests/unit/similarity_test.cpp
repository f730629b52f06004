#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "crowdsched/similarity.hpp"
#include "similarity_oracle.hpp"
#include "support.hpp"

namespace crowdsched {
namespace {

using testing::make_task;

using testing::Oracle;

TEST(Similarity, SelfSimilarityIsOne) {
  const auto t = make_task("A", 0, 3, 5);
  const auto ctx = SimilarityContext::from_tasks(std::vector{t, make_task("B", 9, 10, 20, 900)});
  for (double c : local_similarities(t, t, ctx)) EXPECT_EQ(c, 1.0);
  EXPECT_EQ(pair_similarity(t, t, SimilarityWeights{}, ctx).score, 1.0);
}

TEST(Similarity, ExtremalPrize) {
  auto a = make_task("A", 0, 3, 5, 0);
  auto b = make_task("B", 0, 3, 5, 1000);
  const auto ctx = SimilarityContext::from_tasks(std::vector{a, b});
  const auto c = local_similarities(a, b, ctx);
  EXPECT_EQ(c[0], 0.0);
  for (std::size_t k = 1; k < 7; ++k) EXPECT_EQ(c[k], 1.0) << k;
}

TEST(Similarity, TechnologyOverlapAgainstDatasetMax) {
  auto a = make_task("A", 0, 1, 2);
  auto b = make_task("B", 0, 1, 2);
  auto c = make_task("C", 0, 1, 2);
  a.technologies = {"java", "sql"};
  b.technologies = {"java"};
  c.technologies = {"java", "sql", "net", "js"};
  const auto ctx = SimilarityContext::from_tasks(std::vector{a, b, c});
  ASSERT_EQ(ctx.techs_max, 4u);
  EXPECT_DOUBLE_EQ(local_similarities(a, b, ctx)[4], 0.25);
}

TEST(Similarity, MaximallyDifferentScoresZero) {
  auto a = make_task("A", 0, 0, 0, 0);
  auto b = make_task("B", 10, 10, 10, 100);
  b.task_type = "Other";
  b.technologies = {"sql"};
  b.platform_count = 3;
  b.requirement_text = "unrelated words";
  const auto ctx = SimilarityContext::from_tasks(std::vector{a, b});
  EXPECT_EQ(pair_similarity(a, b, SimilarityWeights{}, ctx).score, 0.0);
}

TEST(Similarity, CosineExamples) {
  auto cos = [](const char* a, const char* b) {
    return cosine_similarity(vectorize_requirements(a), vectorize_requirements(b));
  };
  EXPECT_DOUBLE_EQ(cos("build REST API", "build REST API"), 1.0);
  EXPECT_EQ(cos("alpha beta", "gamma delta"), 0.0);
  EXPECT_NEAR(cos("a a b", "a b b"), 0.8, 1e-15);
  EXPECT_EQ(cos("", ""), 1.0);
  EXPECT_EQ(cos("word", ""), 0.0);
  EXPECT_DOUBLE_EQ(cos("Build, REST!", "build rest"), 1.0);
}

TEST(Similarity, ThreeTaskPoolMatchesBruteForce) {
  std::vector<TaskRecord> tasks = {make_task("A", 0, 5, 10, 300), make_task("B", 2, 4, 6, 900),
                                   make_task("C", 6, 9, 12, 50)};
  tasks[1].technologies = {"java", "sql"};
  tasks[1].task_type = "Assembly";
  tasks[2].requirement_text = "fix the service build";
  tasks[2].platform_count = 2;
  const auto ctx = SimilarityContext::from_tasks(tasks);
  const Oracle oracle(tasks);
  const std::array<double, 7> uniform{1, 1, 1, 1, 1, 1, 1};
  for (const auto& a : tasks) {
    for (const auto& b : tasks) {
      EXPECT_NEAR(pair_similarity(a, b, SimilarityWeights{}, ctx).score, oracle.score(a, b, uniform), 1e-12);
    }
  }
}

TEST(Similarity, RandomPairsMatchOracleAndStayBounded) {
  std::mt19937_64 rng(5);
  std::vector<TaskRecord> tasks;
  for (int i = 0; i < 60; ++i) tasks.push_back(testing::random_task(rng, "T" + std::to_string(i)));
  const auto ctx = SimilarityContext::from_tasks(tasks);
  const Oracle oracle(tasks);
  std::uniform_real_distribution<double> w(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> pick(0, tasks.size() - 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::array<double, 7> raw;
    for (auto& r : raw) r = w(rng);
    const auto weights = SimilarityWeights::from_raw(raw);
    const auto& a = tasks[pick(rng)];
    const auto& b = tasks[pick(rng)];
    const double s = pair_similarity(a, b, weights, ctx).score;
    EXPECT_NEAR(s, oracle.score(a, b, raw), 1e-12);
    EXPECT_EQ(s, pair_similarity(b, a, weights, ctx).score);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Similarity, WeightsNormalizeAndValidate) {
  const auto w = SimilarityWeights::from_raw({2, 0, 0, 0, 0, 0, 2});
  double sum = 0;
  for (double v : w.values()) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_EQ(w[SimilarityFeature::prize], 0.5);
  EXPECT_THROW(SimilarityWeights::from_raw({-1, 1, 1, 1, 1, 1, 1}), std::invalid_argument);
  EXPECT_THROW(SimilarityWeights::from_raw({0, 0, 0, 0, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(SimilarityWeights::from_raw({NAN, 1, 1, 1, 1, 1, 1}), std::invalid_argument);
}

TEST(Similarity, RaisingAWeightMovesScoreTowardThatComponent) {
  std::mt19937_64 rng(9);
  std::vector<TaskRecord> tasks;
  for (int i = 0; i < 30; ++i) tasks.push_back(testing::random_task(rng, "T" + std::to_string(i)));
  const auto ctx = SimilarityContext::from_tasks(tasks);
  for (std::size_t i = 0; i + 1 < tasks.size(); ++i) {
    const auto c = local_similarities(tasks[i], tasks[i + 1], ctx);
    for (std::size_t k = 0; k < 7; ++k) {
      std::array<double, 7> raw;
      raw.fill(1.0);
      const double before = SimilarityWeights::from_raw(raw).combine(c);
      raw[k] = 5.0;
      const double after = SimilarityWeights::from_raw(raw).combine(c);
      if (c[k] >= before) {
        EXPECT_GE(after, before - 1e-15);
      } else {
        EXPECT_LE(after, before + 1e-15);
      }
    }
  }
}

TEST(Similarity, DegenerateNormalizersGiveFullMatch) {
  const auto a = make_task("A", 4, 5, 6, 0);
  auto b = a;
  b.task_id = "B";
  const auto ctx = SimilarityContext::from_tasks(std::vector{a, b});
  EXPECT_EQ(ctx.prize_max, 0.0);
  const auto c = local_similarities(a, b, ctx);
  EXPECT_EQ(c[0], 1.0);
  EXPECT_EQ(c[1], 1.0);
  EXPECT_EQ(c[2], 1.0);
}

}  // namespace
}  // namespace crowdsched

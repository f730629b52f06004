#include <gtest/gtest.h>

#include <fstream>

#include "crowdsched/config.hpp"
#include "support.hpp"

namespace crowdsched {
namespace {

std::string error_of(std::string_view text) {
  try {
    parse_engine_config(text);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return {};
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto cfg = parse_engine_config("");
  EXPECT_EQ(cfg.train.layer_dims, kDefaultLayerDims);
  EXPECT_EQ(cfg.train.batch_size, TrainConfig{}.batch_size);
  EXPECT_EQ(cfg.train.init_draws, 3u);
  EXPECT_EQ(cfg.platform.arrival_rate, ArrivalRateEstimator::registration_sum);
  EXPECT_EQ(cfg.eval.moving_average_window, 7u);
  EXPECT_FALSE(cfg.ingest.exclude_cancelled);
  EXPECT_EQ(cfg.weights.values(), SimilarityWeights{}.values());
}

TEST(Config, EverySectionIsRead) {
  const auto cfg = parse_engine_config(R"(
[similarity.weights]
prize = 2.0
requirement_text = 0.0

[platform]
arrival_rate = "littles_law"
projection = "full_count"
round_open_tasks = true

[train]
layer_dims = [4, 8, 1]
hidden_activation = "tanh"
batch_size = 16
max_epochs = 12
patience = 3
learning_rate = 0.05
momentum = 0.0
validation_fraction = 0.2
holdout_fraction = 0.25
kfold_k = 5
init_draws = 1
seed = 9

[eval]
moving_average_window = 3
pred_thresholds = [0.05, 0.2]
primary_threshold = 0.2

[ingest]
exclude_cancelled = true
)");
  EXPECT_EQ(cfg.platform.arrival_rate, ArrivalRateEstimator::littles_law);
  EXPECT_EQ(cfg.platform.projection, ProjectionBase::full_count);
  EXPECT_TRUE(cfg.platform.round_open_tasks);
  EXPECT_EQ(cfg.train.layer_dims, (std::vector<std::size_t>{4, 8, 1}));
  EXPECT_EQ(cfg.train.hidden_activation, Activation::tanh);
  EXPECT_EQ(cfg.train.batch_size, 16u);
  EXPECT_EQ(cfg.train.max_epochs, 12u);
  EXPECT_EQ(cfg.train.patience, 3u);
  EXPECT_EQ(cfg.train.learning_rate, 0.05);
  EXPECT_EQ(cfg.train.momentum, 0.0);
  EXPECT_EQ(cfg.train.validation_fraction, 0.2);
  EXPECT_EQ(cfg.train.holdout_fraction, 0.25);
  EXPECT_EQ(cfg.train.kfold_k, 5u);
  EXPECT_EQ(cfg.train.init_draws, 1u);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.eval.moving_average_window, 3u);
  EXPECT_EQ(cfg.eval.pred_thresholds, (std::vector<double>{0.05, 0.2}));
  EXPECT_EQ(cfg.eval.primary_threshold, 0.2);
  EXPECT_TRUE(cfg.ingest.exclude_cancelled);
  // Weights are normalized; prize keeps twice the share of an unlisted key.
  EXPECT_DOUBLE_EQ(cfg.weights[SimilarityFeature::prize], 2.0 * cfg.weights[SimilarityFeature::type]);
  EXPECT_EQ(cfg.weights[SimilarityFeature::requirement_text], 0.0);
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
  EXPECT_NE(error_of("[train]\nlearning_rat = 0.1\n").find("train.learning_rat"), std::string::npos);
  EXPECT_NE(error_of("[similarity.weights]\ncolour = 1\n").find("similarity.weights.colour"), std::string::npos);
  EXPECT_NE(error_of("[dashboard]\n").find("dashboard"), std::string::npos);
}

TEST(Config, BadValuesNameTheKey) {
  EXPECT_NE(error_of("[train]\nbatch_size = \"big\"\n").find("train.batch_size"), std::string::npos);
  EXPECT_NE(error_of("[train]\nhidden_activation = \"swish\"\n").find("train.hidden_activation"), std::string::npos);
  EXPECT_NE(error_of("[platform]\narrival_rate = \"guess\"\n").find("platform.arrival_rate"), std::string::npos);
  EXPECT_NE(error_of("[similarity.weights]\nprize = -1\n").find("similarity.weights"), std::string::npos);
  EXPECT_FALSE(error_of("[train]\nkfold_k = 1\n").empty());
  EXPECT_FALSE(error_of("[eval]\nprimary_threshold = 0.3\n").empty());
}

TEST(Config, SyntaxErrorsReportTheLine) {
  const auto msg = error_of("[train]\nseed = 1\nbatch_size = = 3\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, SyntheticSpec) {
  const auto spec = parse_synthetic_spec(R"(
[synthetic]
task_count = 500
arrival_rate = 9.5
seed = 3

[synthetic.failure]
kind = "constant"
constant = 0.75

[platform]
arrival_rate = "littles_law"
)");
  EXPECT_EQ(spec.task_count, 500u);
  EXPECT_EQ(spec.arrival_rate, 9.5);
  EXPECT_EQ(spec.seed, 3u);
  EXPECT_EQ(spec.failure.kind, FailureFunction::Kind::constant);
  EXPECT_EQ(spec.failure.constant, 0.75);
  EXPECT_EQ(spec.platform.arrival_rate, ArrivalRateEstimator::littles_law);
  EXPECT_EQ(spec.project_count, SyntheticSpec{}.project_count);

  EXPECT_EQ(parse_synthetic_spec("").task_count, 4908u);
  EXPECT_THROW(parse_synthetic_spec("[synthetic]\ntask_count = 0\n"), std::invalid_argument);
  EXPECT_THROW(parse_synthetic_spec("[synthetic.failure]\nkind = \"linear\"\n"), std::invalid_argument);
  EXPECT_THROW(parse_synthetic_spec("[train]\nseed = 1\n"), std::invalid_argument);
}

TEST(Config, LoadFromFile) {
  const testing::TempDir dir("config");
  std::ofstream(dir.path() / "c.toml") << "[train]\nseed = 77\n";
  EXPECT_EQ(load_engine_config(dir.path() / "c.toml").train.seed, 77u);
  EXPECT_THROW(load_engine_config(dir.path() / "missing.toml"), std::runtime_error);
}

}  // namespace
}  // namespace crowdsched

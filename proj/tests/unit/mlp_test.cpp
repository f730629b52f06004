#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "crowdsched/mlp.hpp"
#include "support.hpp"

namespace crowdsched {
namespace {

FeatureVector random_features(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return {u(rng), u(rng), u(rng), u(rng)};
}

TEST(Mlp, ZeroModelOutputsOneHalf) {
  const auto model = MlpModel::zeros(kDefaultLayerDims, Activation::relu);
  EXPECT_EQ(model.forward({0, 0, 0, 0}), 0.5);
  EXPECT_EQ(model.forward({100, 1, 5000, 30}), 0.5);
}

TEST(Mlp, DefaultArchitecture) {
  const MlpModel model(1);
  EXPECT_EQ(model.layer_dims(), (std::vector<std::size_t>{4, 32, 16, 8, 4, 2, 1}));
  ASSERT_EQ(model.layers().size(), 6u);
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    EXPECT_EQ(layer.inputs, model.layer_dims()[l]);
    EXPECT_EQ(layer.outputs, model.layer_dims()[l + 1]);
    EXPECT_EQ(layer.weights.size(), layer.inputs * layer.outputs);
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    for (double w : layer.weights) EXPECT_LE(std::fabs(w), limit);
  }
  EXPECT_EQ(model.parameter_count(), 4u * 32 + 32 + 32 * 16 + 16 + 16 * 8 + 8 + 8 * 4 + 4 + 4 * 2 + 2 + 2 + 1);
}

TEST(Mlp, SameSeedSameWeightsAndOutputs) {
  const MlpModel a(kDefaultLayerDims, Activation::relu, 99);
  const MlpModel b(kDefaultLayerDims, Activation::relu, 99);
  EXPECT_EQ(a, b);
  const FeatureVector x{3, 0.2, 1, -1};
  EXPECT_EQ(a.forward(x), a.forward(x));
  EXPECT_NE(a, MlpModel(kDefaultLayerDims, Activation::relu, 100));
}

TEST(Mlp, OutputStaysInsideUnitInterval) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> big(-1e6, 1e6);
  for (auto act : {Activation::relu, Activation::leaky_relu, Activation::tanh, Activation::sigmoid,
                   Activation::identity}) {
    MlpModel model(kDefaultLayerDims, act, 3);
    for (auto& layer : model.layers()) {
      for (auto& w : layer.weights) w *= 50.0;
    }
    for (int i = 0; i < 200; ++i) {
      const double y = model.forward({big(rng), big(rng), big(rng), big(rng)});
      EXPECT_GT(y, 0.0);
      EXPECT_LT(y, 1.0);
    }
  }
}

TEST(Mlp, GradientsMatchFiniteDifferencesOnSmallModels) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> label(0.0, 1.0);
  for (auto act : {Activation::relu, Activation::leaky_relu, Activation::tanh, Activation::sigmoid}) {
    const MlpModel model({4, 5, 3, 1}, act, 12);
    for (int i = 0; i < 10; ++i) {
      EXPECT_LT(gradient_check(model, random_features(rng), label(rng)), 1e-4) << to_string(act);
    }
  }
}

TEST(Mlp, GradientsMatchFiniteDifferencesOnFullNetwork) {
  std::mt19937_64 rng(10);
  const MlpModel model(kDefaultLayerDims, Activation::relu, 5);
  for (int i = 0; i < 5; ++i) EXPECT_LT(gradient_check(model, random_features(rng), i % 2), 1e-4);
}

TEST(Mlp, ZeroInputGivesZeroFirstLayerWeightGradients) {
  const MlpModel model(kDefaultLayerDims, Activation::relu, 6);
  Gradients grads = Gradients::like(model);
  Workspace work(model);
  const std::array<double, 4> zero{0, 0, 0, 0};
  accumulate_gradients(model, zero, 1.0, 1.0, grads, work);
  for (double g : grads.weights[0]) EXPECT_EQ(g, 0.0);
}

TEST(Mlp, GradientCheckRejectsBadEpsilon) {
  const MlpModel model(1);
  EXPECT_THROW(gradient_check(model, {0, 0, 0, 0}, 0.5, 1e-9), std::invalid_argument);
  EXPECT_THROW(gradient_check(model, {0, 0, 0, 0}, 0.5, 0.1), std::invalid_argument);
}

TEST(Mlp, NormStatsUsePopulationStddevAndGuardDegenerateFeatures) {
  const std::vector<FeatureVector> rows = {{1, 0.5, 10, 3}, {3, 0.5, 30, 3}};
  const auto s = NormStats::fit(rows);
  EXPECT_EQ(s.mean[0], 2.0);
  EXPECT_EQ(s.stddev[0], 1.0);
  EXPECT_EQ(s.stddev[2], 10.0);
  EXPECT_EQ(s.stddev[1], 1.0);  // constant feature
  EXPECT_EQ(s.stddev[3], 1.0);
  const auto z = s.apply({3, 0.5, 10, 3});
  EXPECT_EQ(z[0], 1.0);
  EXPECT_EQ(z[1], 0.0);
  EXPECT_EQ(z[2], -1.0);
}

TEST(Mlp, JsonRoundTripIsExact) {
  MlpModel model(kDefaultLayerDims, Activation::tanh, 77);
  model.set_norm_stats(NormStats::fit(std::vector<FeatureVector>{{1, 0.1, 5, 2}, {9, 0.7, 900, 20}}));
  const auto back = model_from_json(model_to_json(model));
  EXPECT_EQ(back, model);
  EXPECT_EQ(model_to_json(back).dump(), model_to_json(model).dump());

  const testing::TempDir dir("mlp");
  save_model(model, dir.path() / "m.json");
  EXPECT_EQ(load_model(dir.path() / "m.json"), model);
}

TEST(Mlp, MalformedModelJsonIsRejected) {
  auto doc = model_to_json(MlpModel(3));
  auto bad = doc;
  bad["version"] = 99;
  EXPECT_THROW(model_from_json(bad), std::invalid_argument);
  bad = doc;
  bad["layers"][0]["biases"].erase(0);
  EXPECT_THROW(model_from_json(bad), std::invalid_argument);
  bad = doc;
  bad["norm_stats"]["stddev"][0] = 0.0;
  EXPECT_THROW(model_from_json(bad), std::invalid_argument);
  EXPECT_THROW(model_from_json(nlohmann::json::array()), std::invalid_argument);
}

TEST(Mlp, ArchitectureValidation) {
  EXPECT_THROW(MlpModel({4}, Activation::relu, 0), std::invalid_argument);
  EXPECT_THROW(MlpModel({3, 2, 1}, Activation::relu, 0), std::invalid_argument);
  EXPECT_THROW(MlpModel({4, 2, 2}, Activation::relu, 0), std::invalid_argument);
  EXPECT_THROW(MlpModel({4, 0, 1}, Activation::relu, 0), std::invalid_argument);
  EXPECT_THROW(activation_from_string("swish"), std::invalid_argument);
  for (auto act : {Activation::relu, Activation::leaky_relu, Activation::tanh, Activation::sigmoid,
                   Activation::identity}) {
    EXPECT_EQ(activation_from_string(to_string(act)), act);
  }
}

}  // namespace
}  // namespace crowdsched

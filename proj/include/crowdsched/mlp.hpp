#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "crowdsched/features.hpp"

namespace crowdsched {

enum class Activation { relu, leaky_relu, tanh, sigmoid, identity };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

/// 4 inputs, five hidden layers, one probability output.
inline const std::vector<std::size_t> kDefaultLayerDims = {4, 32, 16, 8, 4, 2, 1};

/// Fully connected layer; weights are row-major, one row per output unit.
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double& weight(std::size_t out, std::size_t in) { return weights[out * inputs + in]; }
  double weight(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }

  bool operator==(const DenseLayer&) const = default;
};

/// Per-feature z-score statistics. Degenerate features get stddev 1.
struct NormStats {
  std::array<double, kFeatureCount> mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, kFeatureCount> stddev{1.0, 1.0, 1.0, 1.0};

  static NormStats fit(std::span<const FeatureVector> rows);
  std::array<double, kFeatureCount> apply(const FeatureVector& x) const;
  bool operator==(const NormStats&) const = default;
};

/// Feed-forward failure-probability network with a sigmoid output unit.
class MlpModel {
 public:
  /// Glorot-uniform weights drawn from `seed`, hidden biases 0.1, output bias 0,
  /// identity normalization.
  MlpModel(std::vector<std::size_t> layer_dims, Activation hidden, std::uint64_t seed);
  explicit MlpModel(std::uint64_t seed = 0) : MlpModel(kDefaultLayerDims, Activation::relu, seed) {}

  /// All weights and biases zero.
  static MlpModel zeros(std::vector<std::size_t> layer_dims, Activation hidden);

  /// Normalizes `x` with the stored statistics, then runs the network.
  double forward(const FeatureVector& x) const;
  double forward_normalized(std::span<const double> input) const;

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  Activation hidden_activation() const { return hidden_; }
  const NormStats& norm_stats() const { return norm_; }
  void set_norm_stats(const NormStats& stats) { norm_ = stats; }
  std::uint64_t seed() const { return seed_; }
  std::size_t parameter_count() const;

  bool operator==(const MlpModel&) const = default;

 private:
  friend MlpModel model_from_json(const nlohmann::json& document);

  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
  Activation hidden_ = Activation::relu;
  NormStats norm_;
  std::uint64_t seed_ = 0;
};

/// Parameter gradients, shaped like the model's layers.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients like(const MlpModel& model);
  void zero();
};

/// Scratch buffers for forward/backward passes.
struct Workspace {
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> post;  // activation per layer, post[0] = input
  std::vector<std::vector<double>> delta;

  explicit Workspace(const MlpModel& model);
};

/// Squared-error loss (y - target)^2 on one normalized example. Adds
/// `scale` * dLoss/dParam into `grads` and returns the unscaled loss.
double accumulate_gradients(const MlpModel& model, std::span<const double> input, double target, double scale,
                            Gradients& grads, Workspace& work);

/// Largest relative difference between backpropagated gradients and central
/// finite differences over every weight and bias, for the squared error of
/// one example. Relative error is |a - n| / max(|a|, |n|, 1e-8); the finite
/// differences are taken in extended precision.
double gradient_check(const MlpModel& model, const FeatureVector& x, double label, double epsilon = 1e-6);

nlohmann::json model_to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& document);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace crowdsched

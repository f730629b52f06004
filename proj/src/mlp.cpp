#include "crowdsched/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "crowdsched/rng.hpp"

namespace crowdsched {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kLeakySlope = 0.01;
// Small positive start keeps rectified units of the narrow layers alive.
constexpr double kHiddenBiasInit = 0.1;
// Output stays strictly inside (0,1) even when the sigmoid saturates.
constexpr double kMinProbability = std::numeric_limits<double>::min();
constexpr double kMaxProbability = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
T activate(Activation a, T z) {
  switch (a) {
    case Activation::relu:
      return z > T(0) ? z : T(0);
    case Activation::leaky_relu:
      return z > T(0) ? z : T(kLeakySlope) * z;
    case Activation::tanh:
      return std::tanh(z);
    case Activation::sigmoid:
      return sigmoid(z);
    case Activation::identity:
      return z;
  }
  return z;
}

// Derivative expressed through the pre-activation z and activation y.
double activate_derivative(Activation a, double z, double y) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu:
      return z > 0.0 ? 1.0 : kLeakySlope;
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::sigmoid:
      return y * (1.0 - y);
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("network needs at least an input and an output layer");
  if (dims.front() != kFeatureCount) {
    throw std::invalid_argument("network input width must be " + std::to_string(kFeatureCount));
  }
  if (dims.back() != 1) throw std::invalid_argument("network output width must be 1");
  for (auto d : dims) {
    if (d == 0) throw std::invalid_argument("layer width must be positive");
  }
}

// Loss of one example with a single parameter nudged by `nudge`, evaluated
// entirely in extended precision.
long double perturbed_loss(const MlpModel& model, std::span<const double> input, double target,
                           std::size_t layer_index, bool bias, std::size_t param, long double nudge) {
  std::vector<long double> activation(input.begin(), input.end());
  std::vector<long double> next;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    next.assign(layer.outputs, 0.0L);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      long double b = layer.biases[o];
      if (bias && l == layer_index && param == o) b += nudge;
      long double sum = b;
      for (std::size_t i = 0; i < layer.inputs; ++i) {
        long double w = layer.weights[o * layer.inputs + i];
        if (!bias && l == layer_index && param == o * layer.inputs + i) w += nudge;
        sum += w * activation[i];
      }
      const bool output_layer = l + 1 == layers.size();
      next[o] = output_layer ? sigmoid(sum) : activate(model.hidden_activation(), sum);
    }
    activation.swap(next);
  }
  const long double err = activation[0] - static_cast<long double>(target);
  return err * err;
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::relu:
      return "relu";
    case Activation::leaky_relu:
      return "leaky_relu";
    case Activation::tanh:
      return "tanh";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      return "identity";
  }
  return "relu";
}

Activation activation_from_string(std::string_view name) {
  for (auto a : {Activation::relu, Activation::leaky_relu, Activation::tanh, Activation::sigmoid,
                 Activation::identity}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

NormStats NormStats::fit(std::span<const FeatureVector> rows) {
  NormStats stats;
  if (rows.empty()) return stats;
  const double n = static_cast<double>(rows.size());
  std::array<double, kFeatureCount> sum{};
  for (const auto& r : rows) {
    const auto v = r.values();
    for (std::size_t k = 0; k < kFeatureCount; ++k) sum[k] += v[k];
  }
  for (std::size_t k = 0; k < kFeatureCount; ++k) stats.mean[k] = sum[k] / n;
  std::array<double, kFeatureCount> sq{};
  for (const auto& r : rows) {
    const auto v = r.values();
    for (std::size_t k = 0; k < kFeatureCount; ++k) sq[k] += (v[k] - stats.mean[k]) * (v[k] - stats.mean[k]);
  }
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    const double sd = std::sqrt(sq[k] / n);
    stats.stddev[k] = sd > 1e-12 ? sd : 1.0;
  }
  return stats;
}

std::array<double, kFeatureCount> NormStats::apply(const FeatureVector& x) const {
  auto v = x.values();
  for (std::size_t k = 0; k < kFeatureCount; ++k) v[k] = (v[k] - mean[k]) / stddev[k];
  return v;
}

MlpModel::MlpModel(std::vector<std::size_t> layer_dims, Activation hidden, std::uint64_t seed)
    : dims_(std::move(layer_dims)), hidden_(hidden), seed_(seed) {
  check_dims(dims_);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    DenseLayer layer;
    layer.inputs = dims_[l];
    layer.outputs = dims_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    std::uniform_real_distribution<double> dist(-limit, limit);
    layer.weights.resize(layer.inputs * layer.outputs);
    for (auto& w : layer.weights) w = dist(rng);
    const bool hidden_layer = l + 2 < dims_.size();
    layer.biases.assign(layer.outputs, hidden_layer ? kHiddenBiasInit : 0.0);
    layers_.push_back(std::move(layer));
  }
}

MlpModel MlpModel::zeros(std::vector<std::size_t> layer_dims, Activation hidden) {
  MlpModel model(std::move(layer_dims), hidden, 0);
  for (auto& layer : model.layers_) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
  }
  return model;
}

double MlpModel::forward(const FeatureVector& x) const {
  const auto z = norm_.apply(x);
  return forward_normalized(z);
}

double MlpModel::forward_normalized(std::span<const double> input) const {
  if (input.size() != dims_.front()) throw std::invalid_argument("input width mismatch");
  std::vector<double> activation(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    next.assign(layer.outputs, 0.0);
    const bool output_layer = l + 1 == layers_.size();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      double sum = layer.biases[o];
      const double* row = layer.weights.data() + o * layer.inputs;
      for (std::size_t i = 0; i < layer.inputs; ++i) sum += row[i] * activation[i];
      next[o] = output_layer ? sigmoid(sum) : activate(hidden_, sum);
    }
    activation.swap(next);
  }
  return std::clamp(activation[0], kMinProbability, kMaxProbability);
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.biases.size();
  return n;
}

Gradients Gradients::like(const MlpModel& model) {
  Gradients g;
  for (const auto& layer : model.layers()) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.biases.emplace_back(layer.biases.size(), 0.0);
  }
  return g;
}

void Gradients::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

Workspace::Workspace(const MlpModel& model) {
  const auto& dims = model.layer_dims();
  post.emplace_back(dims.front(), 0.0);
  for (std::size_t l = 1; l < dims.size(); ++l) {
    pre.emplace_back(dims[l], 0.0);
    post.emplace_back(dims[l], 0.0);
    delta.emplace_back(dims[l], 0.0);
  }
}

double accumulate_gradients(const MlpModel& model, std::span<const double> input, double target, double scale,
                            Gradients& grads, Workspace& work) {
  const auto& layers = model.layers();
  const std::size_t depth = layers.size();
  std::copy(input.begin(), input.end(), work.post[0].begin());

  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = layers[l];
    const auto& in = work.post[l];
    auto& z = work.pre[l];
    auto& a = work.post[l + 1];
    const bool output_layer = l + 1 == depth;
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      double sum = layer.biases[o];
      const double* row = layer.weights.data() + o * layer.inputs;
      for (std::size_t i = 0; i < layer.inputs; ++i) sum += row[i] * in[i];
      z[o] = sum;
      a[o] = output_layer ? sigmoid(sum) : activate(model.hidden_activation(), sum);
    }
  }

  const double y = work.post[depth][0];
  const double err = y - target;
  // d/dz of (sigmoid(z) - t)^2.
  work.delta[depth - 1][0] = scale * 2.0 * err * y * (1.0 - y);

  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = layers[l];
    const auto& in = work.post[l];
    const auto& d = work.delta[l];
    auto& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      gb[o] += d[o];
      double* grow = gw.data() + o * layer.inputs;
      for (std::size_t i = 0; i < layer.inputs; ++i) grow[i] += d[o] * in[i];
    }
    if (l == 0) break;
    auto& below = work.delta[l - 1];
    const auto& z_below = work.pre[l - 1];
    const auto& a_below = work.post[l];
    for (std::size_t i = 0; i < layer.inputs; ++i) {
      double back = 0.0;
      for (std::size_t o = 0; o < layer.outputs; ++o) back += layer.weights[o * layer.inputs + i] * d[o];
      below[i] = back * activate_derivative(model.hidden_activation(), z_below[i], a_below[i]);
    }
  }
  return err * err;
}

double gradient_check(const MlpModel& model, const FeatureVector& x, double label, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) throw std::invalid_argument("epsilon must lie in [1e-6, 1e-3]");
  const auto z = model.norm_stats().apply(x);
  Gradients grads = Gradients::like(model);
  Workspace work(model);
  accumulate_gradients(model, z, label, 1.0, grads, work);

  const long double h = epsilon;
  double worst = 0.0;
  auto compare = [&](double analytic, std::size_t l, bool bias, std::size_t p) {
    const long double plus = perturbed_loss(model, z, label, l, bias, p, h);
    const long double minus = perturbed_loss(model, z, label, l, bias, p, -h);
    const double numeric = static_cast<double>((plus - minus) / (2.0L * h));
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    for (std::size_t p = 0; p < grads.weights[l].size(); ++p) compare(grads.weights[l][p], l, false, p);
    for (std::size_t p = 0; p < grads.biases[l].size(); ++p) compare(grads.biases[l][p], l, true, p);
  }
  return worst;
}

nlohmann::json model_to_json(const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      rows.push_back(std::vector<double>(layer.weights.begin() + static_cast<std::ptrdiff_t>(o * layer.inputs),
                                         layer.weights.begin() + static_cast<std::ptrdiff_t>((o + 1) * layer.inputs)));
    }
    layers.push_back({{"weights", rows}, {"biases", layer.biases}});
  }
  std::vector<std::string> names(kFeatureNames.begin(), kFeatureNames.end());
  return {
      {"format", "crowd-sched-mlp"},
      {"version", kFormatVersion},
      {"layer_dims", model.layer_dims()},
      {"hidden_activation", to_string(model.hidden_activation())},
      {"output_activation", "sigmoid"},
      {"feature_names", names},
      {"layers", layers},
      {"norm_stats", {{"mean", model.norm_stats().mean}, {"stddev", model.norm_stats().stddev}}},
      {"seed", model.seed()},
  };
}

MlpModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "crowd-sched-mlp") throw std::invalid_argument("not a model file");
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw std::invalid_argument("unsupported model version " + doc.at("version").dump());
    }
    if (doc.at("output_activation").get<std::string>() != "sigmoid") {
      throw std::invalid_argument("output activation must be sigmoid");
    }
    MlpModel model(kDefaultLayerDims, Activation::relu, 0);
    model.layers_.clear();
    model.dims_ = doc.at("layer_dims").get<std::vector<std::size_t>>();
    check_dims(model.dims_);
    model.hidden_ = activation_from_string(doc.at("hidden_activation").get<std::string>());
    model.seed_ = doc.at("seed").get<std::uint64_t>();
    const auto& layers = doc.at("layers");
    if (layers.size() + 1 != model.dims_.size()) throw std::invalid_argument("layer count does not match layer_dims");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      DenseLayer layer;
      layer.inputs = model.dims_[l];
      layer.outputs = model.dims_[l + 1];
      const auto& rows = layers[l].at("weights");
      if (rows.size() != layer.outputs) throw std::invalid_argument("weight rows do not match layer width");
      for (const auto& row : rows) {
        auto values = row.get<std::vector<double>>();
        if (values.size() != layer.inputs) throw std::invalid_argument("weight row has wrong length");
        layer.weights.insert(layer.weights.end(), values.begin(), values.end());
      }
      layer.biases = layers[l].at("biases").get<std::vector<double>>();
      if (layer.biases.size() != layer.outputs) throw std::invalid_argument("bias vector has wrong length");
      model.layers_.push_back(std::move(layer));
    }
    const auto& norm = doc.at("norm_stats");
    model.norm_.mean = norm.at("mean").get<std::array<double, kFeatureCount>>();
    model.norm_.stddev = norm.at("stddev").get<std::array<double, kFeatureCount>>();
    for (double sd : model.norm_.stddev) {
      if (!(sd > 0.0)) throw std::invalid_argument("norm_stats stddev must be positive");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed model JSON: ") + e.what());
  }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model).dump(1) << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace crowdsched

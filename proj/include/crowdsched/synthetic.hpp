#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crowdsched/features.hpp"
#include "crowdsched/platform_state.hpp"
#include "crowdsched/similarity.hpp"
#include "crowdsched/task_model.hpp"

namespace crowdsched {

/// Ground-truth failure probability as a function of z-scored features.
struct FailureFunction {
  enum class Kind { constant, planted };

  Kind kind = Kind::planted;
  double constant = 0.75;
  // planted: floor + (ceiling - floor) * sigmoid(h) with
  // h = mismatch_weight * (|z_prize - z_duration| - mismatch_offset)
  //     + open_tasks_weight * z_open + similarity_weight * z_similarity
  double floor = 0.02;
  double ceiling = 0.98;
  double mismatch_weight = 12.0;
  double mismatch_offset = 0.95;
  double open_tasks_weight = 1.0;
  double similarity_weight = 0.5;

  double evaluate(const std::array<double, kFeatureCount>& z) const;
};

struct SyntheticSpec {
  std::size_t task_count = 4908;
  double arrival_rate = 13.0;  // tasks per day
  double duration_mean = 14.0;
  double duration_spread = 4.0;
  double prize_mean = 800.0;
  double prize_spread = 350.0;
  double prize_min = 50.0;
  double runnerup_probability = 0.7;
  std::size_t technology_vocabulary = 24;
  std::size_t max_technologies = 4;
  std::size_t text_vocabulary = 300;
  std::size_t project_count = 403;
  FailureFunction failure;
  SimilarityWeights weights;  // used to compute the true features
  PlatformOptions platform;
  std::uint64_t seed = 7;

  /// Throws std::invalid_argument naming the problem.
  void validate() const;
};

struct TruthRow {
  std::string task_id;
  double phi = 0.0;
  FeatureVector features;
};

struct SyntheticCorpus {
  Dataset dataset;
  std::vector<TruthRow> truth;  // parallel to dataset.tasks
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Path of the ground-truth sidecar written next to `dataset_path`.
std::filesystem::path truth_path_for(const std::filesystem::path& dataset_path);

std::string truth_to_csv(const std::vector<TruthRow>& truth);

/// Writes the dataset (format from the extension) and its sidecar.
void save_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dataset_path);

}  // namespace crowdsched

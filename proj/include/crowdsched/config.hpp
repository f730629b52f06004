#pragma once

#include <filesystem>
#include <string_view>

#include "crowdsched/compare.hpp"
#include "crowdsched/platform_state.hpp"
#include "crowdsched/similarity.hpp"
#include "crowdsched/synthetic.hpp"
#include "crowdsched/task_model.hpp"
#include "crowdsched/training.hpp"

namespace crowdsched {

/// Engine settings read from TOML. Every section and key is optional;
/// unknown keys are rejected.
///
///   [similarity.weights]  prize, registration_start, submission_end, type,
///                         technology, platform, requirement_text (missing = 1)
///   [platform]            arrival_rate = "registration_sum" | "littles_law",
///                         projection = "survivors" | "full_count", round_open_tasks
///   [train]               layer_dims, hidden_activation, batch_size, max_epochs,
///                         patience, learning_rate, momentum, validation_fraction,
///                         holdout_fraction, kfold_k, init_draws, target, seed
///   [eval]                moving_average_window, pred_thresholds, primary_threshold
///   [ingest]              exclude_cancelled
struct EngineConfig {
  SimilarityWeights weights;
  PlatformOptions platform;
  TrainConfig train;
  EvalConfig eval;
  LoadOptions ingest;
};

EngineConfig parse_engine_config(std::string_view toml_text);
EngineConfig load_engine_config(const std::filesystem::path& path);

/// Synthetic corpus spec: a [synthetic] table with a [synthetic.failure]
/// subtable, plus optional [similarity.weights] and [platform] tables that
/// define how the true features are computed.
SyntheticSpec parse_synthetic_spec(std::string_view toml_text);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

}  // namespace crowdsched

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crowdsched/task_model.hpp"

namespace crowdsched {

/// The seven per-feature local similarities, in this fixed order.
enum class SimilarityFeature : std::size_t {
  prize,
  registration_start,
  submission_end,
  type,
  technology,
  platform,
  requirement_text,
};

inline constexpr std::size_t kSimilarityFeatureCount = 7;
inline constexpr std::array<std::string_view, kSimilarityFeatureCount> kSimilarityFeatureNames = {
    "prize", "registration_start", "submission_end", "type", "technology", "platform", "requirement_text"};

using LocalSimilarities = std::array<double, kSimilarityFeatureCount>;

/// Non-negative per-feature weights, normalized to sum to one.
class SimilarityWeights {
 public:
  /// Uniform weights (1/7 each).
  SimilarityWeights();

  /// Normalizes `raw`; throws std::invalid_argument if any weight is negative,
  /// non-finite, or all are zero.
  static SimilarityWeights from_raw(const std::array<double, kSimilarityFeatureCount>& raw);

  double operator[](SimilarityFeature f) const { return values_[static_cast<std::size_t>(f)]; }
  const std::array<double, kSimilarityFeatureCount>& values() const { return values_; }
  double total() const { return total_; }

  /// Weighted mean of `components`. Dividing by the stored total keeps the
  /// result in [0,1] and makes all-ones components score exactly 1.
  double combine(const LocalSimilarities& components) const;

 private:
  std::array<double, kSimilarityFeatureCount> values_;
  double total_;
};

/// Dataset-wide normalizers for the prize, date and technology components.
/// A zero maximum marks a degenerate feature; that component is then 1.
struct SimilarityContext {
  double prize_max = 0.0;
  double diff_tr_max = 0.0;
  double diff_ts_max = 0.0;
  std::size_t techs_max = 0;

  static SimilarityContext from_tasks(std::span<const TaskRecord> tasks);
  bool operator==(const SimilarityContext&) const = default;
};

/// Sparse term-frequency vector, terms sorted ascending.
struct TermVector {
  std::vector<std::pair<std::string, int>> terms;
  double squared_norm = 0.0;

  bool empty() const { return terms.empty(); }
};

/// Lowercases ASCII letters, deletes characters that are neither
/// alphanumeric, whitespace nor part of a multi-byte UTF-8 sequence, then
/// counts whitespace-separated tokens.
TermVector vectorize_requirements(std::string_view text);

/// Cosine of two term vectors: 1 when both are empty, 0 when only one is.
double cosine_similarity(const TermVector& a, const TermVector& b);

/// Everything pair scoring needs from a record, precomputed once per task.
struct TaskProfile {
  double prize = 0.0;
  Day registration_start = 0;
  Day submission_end = 0;
  std::string type;
  std::vector<std::string> technologies;  // sorted
  int platform_count = 0;
  TermVector requirements;
};

TaskProfile make_profile(const TaskRecord& task);

LocalSimilarities local_similarities(const TaskProfile& a, const TaskProfile& b,
                                     const SimilarityContext& ctx);
LocalSimilarities local_similarities(const TaskRecord& a, const TaskRecord& b,
                                     const SimilarityContext& ctx);

struct PairSimilarity {
  std::string task_i;
  std::string task_j;
  double score = 0.0;
  LocalSimilarities per_feature{};
};

PairSimilarity pair_similarity(const TaskRecord& a, const TaskRecord& b, const SimilarityWeights& weights,
                               const SimilarityContext& ctx);

/// Weights plus normalizers: what is needed to score any pair of tasks.
struct SimilarityModel {
  SimilarityWeights weights;
  SimilarityContext context;

  double score(const TaskProfile& a, const TaskProfile& b) const {
    return weights.combine(local_similarities(a, b, context));
  }
};

}  // namespace crowdsched

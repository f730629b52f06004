#include "crowdsched/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace crowdsched {

namespace {

// 1 - |a-b|/max, clamped to [0,1]; a degenerate normalizer means all values agree.
double normalized_closeness(double a, double b, double max_diff) {
  if (!(max_diff > 0.0)) return 1.0;
  return std::clamp(1.0 - std::abs(a - b) / max_diff, 0.0, 1.0);
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

SimilarityWeights::SimilarityWeights() {
  values_.fill(1.0 / static_cast<double>(kSimilarityFeatureCount));
  total_ = 0.0;
  for (double w : values_) total_ += w;
}

SimilarityWeights SimilarityWeights::from_raw(const std::array<double, kSimilarityFeatureCount>& raw) {
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]) || raw[i] < 0.0) {
      throw std::invalid_argument("similarity weight '" + std::string(kSimilarityFeatureNames[i]) +
                                  "' must be finite and non-negative");
    }
    sum += raw[i];
  }
  if (!(sum > 0.0)) throw std::invalid_argument("similarity weights must not all be zero");

  SimilarityWeights w;
  w.total_ = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    w.values_[i] = raw[i] / sum;
    w.total_ += w.values_[i];
  }
  return w;
}

double SimilarityWeights::combine(const LocalSimilarities& components) const {
  double weighted = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) weighted += values_[i] * components[i];
  return weighted / total_;
}

SimilarityContext SimilarityContext::from_tasks(std::span<const TaskRecord> tasks) {
  SimilarityContext ctx;
  if (tasks.empty()) return ctx;
  Day tr_min = tasks.front().registration_start, tr_max = tr_min;
  Day ts_min = tasks.front().submission_end, ts_max = ts_min;
  for (const auto& t : tasks) {
    ctx.prize_max = std::max(ctx.prize_max, actual_prize(t));
    tr_min = std::min(tr_min, t.registration_start);
    tr_max = std::max(tr_max, t.registration_start);
    ts_min = std::min(ts_min, t.submission_end);
    ts_max = std::max(ts_max, t.submission_end);
    ctx.techs_max = std::max(ctx.techs_max, t.technologies.size());
  }
  ctx.diff_tr_max = static_cast<double>(tr_max - tr_min);
  ctx.diff_ts_max = static_cast<double>(ts_max - ts_min);
  return ctx;
}

TermVector vectorize_requirements(std::string_view text) {
  std::map<std::string, int> counts;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) ++counts[token];
    token.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c)) {
      flush();
    } else if (c >= 0x80) {
      token.push_back(ch);
    } else if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();

  TermVector v;
  v.terms.reserve(counts.size());
  double sq = 0.0;
  for (auto& [term, count] : counts) {
    sq += static_cast<double>(count) * count;
    v.terms.emplace_back(term, count);
  }
  v.squared_norm = sq;
  return v;
}

double cosine_similarity(const TermVector& a, const TermVector& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  double dot = 0.0;
  auto ia = a.terms.begin();
  auto ib = b.terms.begin();
  while (ia != a.terms.end() && ib != b.terms.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += static_cast<double>(ia->second) * ib->second;
      ++ia;
      ++ib;
    }
  }
  // sqrt of the product (not the product of roots) so identical vectors give exactly 1.
  return std::clamp(dot / std::sqrt(a.squared_norm * b.squared_norm), 0.0, 1.0);
}

TaskProfile make_profile(const TaskRecord& task) {
  TaskProfile p;
  p.prize = actual_prize(task);
  p.registration_start = task.registration_start;
  p.submission_end = task.submission_end;
  p.type = task.task_type;
  p.technologies.assign(task.technologies.begin(), task.technologies.end());
  p.platform_count = task.platform_count;
  p.requirements = vectorize_requirements(task.requirement_text);
  return p;
}

LocalSimilarities local_similarities(const TaskProfile& a, const TaskProfile& b,
                                     const SimilarityContext& ctx) {
  LocalSimilarities s{};
  s[static_cast<std::size_t>(SimilarityFeature::prize)] = normalized_closeness(a.prize, b.prize, ctx.prize_max);
  s[static_cast<std::size_t>(SimilarityFeature::registration_start)] =
      normalized_closeness(static_cast<double>(a.registration_start),
                           static_cast<double>(b.registration_start), ctx.diff_tr_max);
  s[static_cast<std::size_t>(SimilarityFeature::submission_end)] = normalized_closeness(
      static_cast<double>(a.submission_end), static_cast<double>(b.submission_end), ctx.diff_ts_max);
  s[static_cast<std::size_t>(SimilarityFeature::type)] = a.type == b.type ? 1.0 : 0.0;

  // Identical technology sets are a full match; otherwise the overlap is
  // scored against the largest technology list in the dataset.
  double tech = 1.0;
  if (a.technologies != b.technologies && ctx.techs_max > 0) {
    std::size_t shared = 0;
    auto ia = a.technologies.begin();
    auto ib = b.technologies.begin();
    while (ia != a.technologies.end() && ib != b.technologies.end()) {
      if (*ia < *ib) {
        ++ia;
      } else if (*ib < *ia) {
        ++ib;
      } else {
        ++shared;
        ++ia;
        ++ib;
      }
    }
    tech = std::min(1.0, static_cast<double>(shared) / static_cast<double>(ctx.techs_max));
  }
  s[static_cast<std::size_t>(SimilarityFeature::technology)] = tech;
  s[static_cast<std::size_t>(SimilarityFeature::platform)] = a.platform_count == b.platform_count ? 1.0 : 0.0;
  s[static_cast<std::size_t>(SimilarityFeature::requirement_text)] =
      cosine_similarity(a.requirements, b.requirements);
  return s;
}

LocalSimilarities local_similarities(const TaskRecord& a, const TaskRecord& b,
                                     const SimilarityContext& ctx) {
  return local_similarities(make_profile(a), make_profile(b), ctx);
}

PairSimilarity pair_similarity(const TaskRecord& a, const TaskRecord& b, const SimilarityWeights& weights,
                               const SimilarityContext& ctx) {
  PairSimilarity out;
  out.task_i = a.task_id;
  out.task_j = b.task_id;
  out.per_feature = local_similarities(a, b, ctx);
  out.score = weights.combine(out.per_feature);
  return out;
}

}  // namespace crowdsched

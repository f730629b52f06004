#include "crowdsched/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "crowdsched/mlp.hpp"
#include "crowdsched/rng.hpp"

namespace crowdsched {

namespace {

enum Stream : std::uint64_t {
  kArrivalStream = 0,
  kAttributeStream = 1,
  kProjectStream = 2,
  kLabelStream = 3,
};

constexpr std::array<const char*, 24> kTechnologyNames = {
    "java",    "javascript", "sql",     "html",   "css",     "python", "dotnet", "csharp",
    "angular", "react",      "node",    "spring", "android", "ios",    "swift",  "php",
    "ruby",    "go",         "docker",  "aws",    "mongodb", "oracle", "scala",  "cpp"};

constexpr std::array<const char*, 6> kTaskTypes = {"development", "assembly",    "first2finish",
                                                   "architecture", "ui_prototype", "bug_hunt"};
constexpr std::array<double, 6> kTaskTypeWeights = {0.35, 0.25, 0.2, 0.08, 0.07, 0.05};

std::string technology_name(std::size_t i) {
  if (i < kTechnologyNames.size()) return kTechnologyNames[i];
  return "tech" + std::to_string(i);
}

std::string padded_id(char prefix, std::size_t value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

std::vector<double> zipf_weights(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  return w;
}

// Assigns every task to a project. Each project asks for tasks at evenly
// spaced days inside its own window and takes the unassigned task nearest
// to each requested day.
void assign_projects(std::vector<TaskRecord>& tasks, const SyntheticSpec& spec, Rng& rng) {
  if (spec.project_count == 0 || tasks.empty()) return;
  std::gamma_distribution<double> gamma(2.0, 1.0);
  std::vector<double> share(spec.project_count);
  for (auto& s : share) s = gamma(rng);
  std::discrete_distribution<std::size_t> pick(share.begin(), share.end());
  std::vector<std::size_t> sizes(spec.project_count, 0);
  for (std::size_t i = 0; i < tasks.size(); ++i) ++sizes[pick(rng)];

  std::map<Day, std::vector<std::size_t>> free_by_day;
  for (std::size_t i = tasks.size(); i-- > 0;) free_by_day[tasks[i].registration_start].push_back(i);
  const Day horizon = tasks.back().registration_start;

  std::size_t label = 0;
  for (std::size_t p = 0; p < spec.project_count; ++p) {
    if (sizes[p] == 0) continue;
    const std::string id = padded_id('P', ++label, 4);
    const double spacing = 2.0;
    const Day span = static_cast<Day>(std::ceil(spacing * static_cast<double>(sizes[p] - 1)));
    std::uniform_int_distribution<Day> start_dist(0, std::max<Day>(0, horizon - span));
    const Day start = start_dist(rng);
    for (std::size_t j = 0; j < sizes[p]; ++j) {
      const Day want = start + static_cast<Day>(std::llround(spacing * static_cast<double>(j)));
      auto after = free_by_day.lower_bound(want);
      auto chosen = after;
      if (after == free_by_day.end() || (after != free_by_day.begin() && want - std::prev(after)->first < after->first - want)) {
        chosen = std::prev(after);
      }
      auto& bucket = chosen->second;
      tasks[bucket.back()].project_id = id;
      bucket.pop_back();
      if (bucket.empty()) free_by_day.erase(chosen);
    }
  }
}

}  // namespace

double FailureFunction::evaluate(const std::array<double, kFeatureCount>& z) const {
  if (kind == Kind::constant) return constant;
  const double h = mismatch_weight * (std::abs(z[2] - z[3]) - mismatch_offset) + open_tasks_weight * z[0] +
                   similarity_weight * z[1];
  const double s = h >= 0.0 ? 1.0 / (1.0 + std::exp(-h)) : std::exp(h) / (1.0 + std::exp(h));
  return floor + (ceiling - floor) * s;
}

void SyntheticSpec::validate() const {
  if (task_count == 0) throw std::invalid_argument("synthetic.task_count must be positive");
  if (!(arrival_rate > 0.0) || !std::isfinite(arrival_rate)) {
    throw std::invalid_argument("synthetic.arrival_rate must be positive");
  }
  if (!(duration_mean >= 0.0) || !(duration_spread >= 0.0)) {
    throw std::invalid_argument("synthetic duration mean and spread must be non-negative");
  }
  if (!(prize_mean >= 0.0) || !(prize_spread >= 0.0) || !(prize_min >= 0.0)) {
    throw std::invalid_argument("synthetic prize parameters must be non-negative");
  }
  if (!(runnerup_probability >= 0.0 && runnerup_probability <= 1.0)) {
    throw std::invalid_argument("synthetic.runnerup_probability must lie in [0, 1]");
  }
  if (technology_vocabulary == 0 || max_technologies == 0) {
    throw std::invalid_argument("synthetic technology vocabulary and max_technologies must be positive");
  }
  if (text_vocabulary == 0 && weights[SimilarityFeature::requirement_text] > 0.0) {
    throw std::invalid_argument(
        "synthetic.text_vocabulary is 0 but requirement_text carries similarity weight");
  }
  if (failure.kind == FailureFunction::Kind::constant) {
    if (!(failure.constant >= 0.0 && failure.constant <= 1.0)) {
      throw std::invalid_argument("constant failure probability must lie in [0, 1]");
    }
  } else if (!(failure.floor >= 0.0 && failure.floor <= failure.ceiling && failure.ceiling <= 1.0)) {
    throw std::invalid_argument("failure floor and ceiling must satisfy 0 <= floor <= ceiling <= 1");
  }
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng arrivals(derive_seed(spec.seed, kArrivalStream));
  Rng attributes(derive_seed(spec.seed, kAttributeStream));
  Rng projects(derive_seed(spec.seed, kProjectStream));
  Rng outcomes(derive_seed(spec.seed, kLabelStream));

  std::vector<Day> days;
  days.reserve(spec.task_count);
  std::poisson_distribution<int> per_day(spec.arrival_rate);
  for (Day day = 0; days.size() < spec.task_count; ++day) {
    const int n = per_day(arrivals);
    for (int i = 0; i < n && days.size() < spec.task_count; ++i) days.push_back(day);
  }

  std::normal_distribution<double> duration_dist(spec.duration_mean, spec.duration_spread);
  std::normal_distribution<double> prize_dist(spec.prize_mean, spec.prize_spread);
  std::bernoulli_distribution runnerup(spec.runnerup_probability);
  std::discrete_distribution<std::size_t> type_dist(kTaskTypeWeights.begin(), kTaskTypeWeights.end());
  const auto tech_weights = zipf_weights(spec.technology_vocabulary);
  const std::size_t max_techs = std::min(spec.max_technologies, spec.technology_vocabulary);
  std::uniform_int_distribution<std::size_t> tech_count(1, max_techs);
  std::uniform_int_distribution<int> platforms(1, 3);
  std::uniform_int_distribution<int> gap_dist(0, 2);
  std::uniform_int_distribution<int> word_count(8, 24);
  const auto word_weights = zipf_weights(std::max<std::size_t>(spec.text_vocabulary, 1));
  std::discrete_distribution<std::size_t> word_dist(word_weights.begin(), word_weights.end());

  SyntheticCorpus corpus;
  corpus.dataset.epoch = "synthetic";
  auto& tasks = corpus.dataset.tasks;
  tasks.reserve(spec.task_count);
  const int id_width = std::max<int>(5, static_cast<int>(std::to_string(spec.task_count).size()));
  for (std::size_t i = 0; i < days.size(); ++i) {
    TaskRecord t;
    t.task_id = padded_id('T', i + 1, id_width);
    const Day duration = std::max<Day>(1, static_cast<Day>(std::llround(duration_dist(attributes))));
    const Day gap = std::min<Day>(gap_dist(attributes), duration);
    t.registration_start = days[i];
    t.submission_end = days[i] + duration;
    t.registration_end = t.submission_end - gap;
    t.winner_prize = std::max(spec.prize_min, std::round(prize_dist(attributes)));
    t.runnerup_prize = runnerup(attributes) ? std::round(t.winner_prize / 2.0) : 0.0;
    t.task_type = kTaskTypes[type_dist(attributes)];

    const std::size_t want = tech_count(attributes);
    std::vector<double> remaining = tech_weights;
    for (std::size_t k = 0; k < want; ++k) {
      std::discrete_distribution<std::size_t> pick(remaining.begin(), remaining.end());
      const std::size_t chosen = pick(attributes);
      remaining[chosen] = 0.0;
      t.technologies.insert(technology_name(chosen));
    }
    t.platform_count = platforms(attributes);
    if (spec.text_vocabulary > 0) {
      const int words = word_count(attributes);
      for (int w = 0; w < words; ++w) {
        if (w > 0) t.requirement_text += ' ';
        t.requirement_text += "term" + std::to_string(word_dist(attributes));
      }
    }
    tasks.push_back(std::move(t));
  }
  assign_projects(tasks, spec, projects);

  const SimilarityModel similarity{spec.weights, SimilarityContext::from_tasks(tasks)};
  const LabeledSet features = build_labeled_set(corpus.dataset, similarity, spec.platform);
  const NormStats stats = NormStats::fit(features.features);

  std::poisson_distribution<int> registrations(10.0);
  corpus.truth.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const double phi = spec.failure.evaluate(stats.apply(features.features[i]));
    std::bernoulli_distribution fails(phi);
    auto& t = tasks[i];
    const bool failed = fails(outcomes);
    t.registrations = 1 + registrations(outcomes);
    if (failed) {
      std::binomial_distribution<int> subs(t.registrations, 0.1);
      t.submissions = subs(outcomes);
      t.valid_submissions = 0;
    } else {
      std::binomial_distribution<int> subs(t.registrations - 1, 0.3);
      t.submissions = 1 + subs(outcomes);
      std::binomial_distribution<int> valid(t.submissions - 1, 0.5);
      t.valid_submissions = 1 + valid(outcomes);
    }
    corpus.truth.push_back({t.task_id, phi, features.features[i]});
  }
  validate_dataset(corpus.dataset);
  return corpus;
}

std::filesystem::path truth_path_for(const std::filesystem::path& dataset_path) {
  auto out = dataset_path;
  out.replace_filename(dataset_path.stem().string() + ".truth.csv");
  return out;
}

std::string truth_to_csv(const std::vector<TruthRow>& truth) {
  std::string out = "task_id,phi";
  for (auto name : kFeatureNames) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const auto& row : truth) {
    out += row.task_id;
    out += ',' + format_double(row.phi);
    for (double v : row.features.values()) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

void save_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dataset_path) {
  save_dataset(corpus.dataset, dataset_path);
  const auto sidecar = truth_path_for(dataset_path);
  std::ofstream out(sidecar, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + sidecar.string());
  out << truth_to_csv(corpus.truth);
}

}  // namespace crowdsched

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "crowdsched/synthetic.hpp"
#include "crowdsched/task_model.hpp"

namespace crowdsched::testing {

inline TaskRecord make_task(std::string id, Day tr, Day tre, Day ts, double prize = 500.0) {
  TaskRecord t;
  t.task_id = std::move(id);
  t.registration_start = tr;
  t.registration_end = tre;
  t.submission_end = ts;
  t.winner_prize = prize;
  t.runnerup_prize = 0.0;
  t.task_type = "Code";
  t.technologies = {"java"};
  t.platform_count = 1;
  t.requirement_text = "build a service";
  t.registrations = 5;
  t.submissions = 2;
  t.valid_submissions = 1;
  return t;
}

/// Random but valid record drawn from small vocabularies so pairs share some features.
inline TaskRecord random_task(std::mt19937_64& rng, const std::string& id) {
  static const char* kTypes[] = {"Code", "Assembly", "Architecture", "Test"};
  static const char* kTechs[] = {"java", "sql", "net", "js", "css", "python"};
  static const char* kWords[] = {"build", "api", "rest", "Service", "ui", "fix", "deploy", "data", "café"};
  std::uniform_int_distribution<int> day(0, 60), len(0, 20), small(0, 3), word(0, 8), nwords(0, 8);
  std::uniform_real_distribution<double> prize(0.0, 2000.0);
  TaskRecord t;
  t.task_id = id;
  t.registration_start = day(rng);
  t.registration_end = t.registration_start + len(rng);
  t.submission_end = t.registration_end + small(rng);
  t.winner_prize = std::round(prize(rng));
  t.runnerup_prize = std::round(t.winner_prize / 2.0) * static_cast<double>(small(rng) % 2);
  t.task_type = kTypes[small(rng)];
  const int n_tech = small(rng) + 1;
  for (int k = 0; k < n_tech; ++k) t.technologies.insert(kTechs[word(rng) % 6]);
  t.platform_count = small(rng) + 1;
  const int n = nwords(rng);
  for (int k = 0; k < n; ++k) t.requirement_text += std::string(k ? " " : "") + kWords[word(rng)];
  t.registrations = 10;
  t.submissions = small(rng);
  t.valid_submissions = std::min(t.submissions, small(rng));
  return t;
}

/// Small planted corpus shared by tests that need realistic data.
inline const SyntheticCorpus& small_corpus() {
  static const SyntheticCorpus corpus = [] {
    SyntheticSpec spec;
    spec.task_count = 600;
    spec.project_count = 40;
    spec.seed = 11;
    return generate_synthetic(spec);
  }();
  return corpus;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("crowdsched-" + name + "-" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace crowdsched::testing

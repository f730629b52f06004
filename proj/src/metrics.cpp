#include "crowdsched/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace crowdsched {

double MetricReport::pred(double threshold) const {
  for (const auto& [n, value] : pred_n) {
    if (n == threshold) return value;
  }
  throw std::out_of_range("threshold " + std::to_string(threshold) + " not in report");
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

MetricReport compute_metrics(std::span<const double> predicted, std::span<const double> actual,
                             std::span<const double> thresholds) {
  if (predicted.empty()) throw std::invalid_argument("no predictions to score");
  if (predicted.size() != actual.size()) throw std::invalid_argument("predictions and actuals differ in length");
  std::vector<double> sq(predicted.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!std::isfinite(predicted[i]) || !std::isfinite(actual[i])) {
      throw std::invalid_argument("non-finite value at index " + std::to_string(i));
    }
    const double e = predicted[i] - actual[i];
    sq[i] = e * e;
    if ((predicted[i] >= 0.5) == (actual[i] >= 0.5)) ++correct;
  }
  const double n = static_cast<double>(sq.size());

  MetricReport report;
  report.count = sq.size();
  double sum = 0.0;
  for (double s : sq) sum += s;
  report.mse = sum / n;
  double var = 0.0;
  for (double s : sq) var += (s - report.mse) * (s - report.mse);
  report.std_mse = std::sqrt(var / n);
  report.md_mse = median(sq);
  for (double t : thresholds) {
    const auto hits = std::count_if(sq.begin(), sq.end(), [t](double s) { return s <= t; });
    report.pred_n.emplace_back(t, static_cast<double>(hits) / n);
  }
  report.accuracy = static_cast<double>(correct) / n;
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json pred = nlohmann::json::array();
  for (const auto& [n, value] : report.pred_n) pred.push_back({{"threshold", n}, {"fraction", value}});
  return {
      {"count", report.count},   {"mse", report.mse}, {"md_mse", report.md_mse},
      {"std_mse", report.std_mse}, {"pred_n", pred},  {"accuracy", report.accuracy},
  };
}

}  // namespace crowdsched

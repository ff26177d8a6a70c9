#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace mmb {

// Maps a real value to a class: the number of thresholds <= value.
struct Bucketing {
  int classes = 2;
  std::vector<double> thresholds;

  int bucket(double value) const;
};

struct TaskSpec {
  std::vector<Bucketing> accuracies;
  double positive_threshold = 0.0;  // value >= threshold is the positive class for F1

  // Sentiment in [-3, 3]: A(2) split at 0, A(7) at the half-integers.
  static TaskSpec sentiment();
  // Class-index predictions 0..k-1; class >= 1 is positive.
  static TaskSpec class_indices(int k);
};

struct MetricReport {
  std::map<int, double> accuracy;  // keyed by class count
  double f1 = 0.0;
  double mae = 0.0;
  std::optional<double> pearson_r;  // empty when undefined
  std::size_t n = 0;
};

MetricReport evaluate(std::span<const double> preds, std::span<const double> labels,
                      const TaskSpec& spec);

double mean_absolute_error(std::span<const double> a, std::span<const double> b);

// Sample correlation; empty if fewer than 2 points or either series is constant.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

// Equal-width bins over [min, max]; a constant sample puts everything in one bin.
Histogram histogram(std::span<const double> values, int bins);

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

Moments moments(std::span<const double> values);

}  // namespace mmb

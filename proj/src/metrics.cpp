#include "mmb/metrics.hpp"

#include "mmb/error.hpp"

#include <algorithm>
#include <cmath>

namespace mmb {

int Bucketing::bucket(double value) const {
  return static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), value) -
                          thresholds.begin());
}

TaskSpec TaskSpec::sentiment() {
  TaskSpec spec;
  spec.accuracies.push_back({2, {0.0}});
  spec.accuracies.push_back({7, {-2.5, -1.5, -0.5, 0.5, 1.5, 2.5}});
  spec.positive_threshold = 0.0;
  return spec;
}

TaskSpec TaskSpec::class_indices(int k) {
  require(k >= 2, ErrorKind::config, "need at least two classes");
  Bucketing b{k, {}};
  for (int c = 1; c < k; ++c) b.thresholds.push_back(c - 0.5);
  TaskSpec spec;
  spec.accuracies.push_back(std::move(b));
  spec.positive_threshold = 0.5;
  return spec;
}

double mean_absolute_error(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::dimension, "series lengths differ");
  if (a.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
  return total / static_cast<double>(a.size());
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::dimension, "series lengths differ");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricReport evaluate(std::span<const double> preds, std::span<const double> labels,
                      const TaskSpec& spec) {
  require(preds.size() == labels.size(), ErrorKind::dimension,
          "prediction and label counts differ");
  MetricReport r;
  r.n = preds.size();
  for (const auto& b : spec.accuracies) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += b.bucket(preds[i]) == b.bucket(labels[i]);
    r.accuracy[b.classes] = r.n ? static_cast<double>(hits) / static_cast<double>(r.n) : 0.0;
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] >= spec.positive_threshold;
    const bool y = labels[i] >= spec.positive_threshold;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  r.f1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  r.mae = mean_absolute_error(preds, labels);
  r.pearson_r = pearson(preds, labels);
  return r;
}

Histogram histogram(std::span<const double> values, int bins) {
  require(bins >= 1, ErrorKind::config, "histogram needs at least one bin");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  if (values.empty()) {
    for (int i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / bins);
    return h;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + width * i);
  h.edges.back() = hi;
  for (double v : values) {
    auto idx = static_cast<long>(std::floor((v - lo) / width));
    idx = std::clamp(idx, 0L, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

Moments moments(std::span<const double> values) {
  Moments m;
  m.n = values.size();
  if (values.empty()) return m;
  const double n = static_cast<double>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= n;
  double correction = 0.0;
  for (double v : values) correction += v - m.mean;
  m.mean += correction / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.stddev = std::sqrt(m2);
  if (m2 > 0.0) {
    m.skewness = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

}  // namespace mmb

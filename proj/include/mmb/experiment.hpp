#pragma once

// The four experiment commands. Each validates its RunConfig, creates the
// output directory, writes resolved_config.txt there, and returns what it
// wrote so callers can inspect results without re-reading files.

#include "mmb/dataset_io.hpp"
#include "mmb/learning.hpp"
#include "mmb/metrics.hpp"
#include "mmb/pipeline.hpp"
#include "mmb/run_config.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmb {

struct LoadedDataset {
  WordTable table;
  std::vector<SegmentRecord> records;
  std::vector<MultimodalSegment> segments;
  DatasetInfo info;
};

LoadedDataset load_dataset(const RunConfig& cfg);
PipelineOptions pipeline_options(const RunConfig& cfg);

// One row of embeddings.tsv: id, split, label (NA if absent), degenerate flag,
// then the embedding coordinates.
struct EmbeddingRow {
  std::string id;
  std::string split;
  std::optional<double> label;
  bool degenerate = false;
  Vec m;
};

void write_embeddings(const std::string& path, const std::vector<EmbeddingRow>& rows);
std::vector<EmbeddingRow> read_embeddings(const std::string& path);

// First round(fraction * n) entries of a seeded permutation of 0..n-1,
// returned sorted. For a fixed seed, smaller fractions give subsets of
// larger ones.
std::vector<std::size_t> nested_label_subset(std::size_t n, double fraction, std::uint64_t seed);

struct FitResult {
  TrainState state;
  std::vector<EmbeddingRow> rows;
};

// Writes checkpoint, embeddings.tsv, objective.tsv (one row per iteration).
FitResult cmd_fit(const RunConfig& cfg);

struct TrainEvalResult {
  MetricReport report;
  std::size_t train_count = 0;
  std::size_t labeled_count = 0;
  std::size_t test_count = 0;
  std::vector<std::string> labeled_ids;
  bool fine_tuned = false;
};

// Reads embeddings (or derives them from the checkpoint and dataset), trains
// the head on the labeled subset, optionally fine-tunes, evaluates on the
// test split, and writes metrics.tsv.
TrainEvalResult cmd_train_eval(const RunConfig& cfg);

struct BenchmarkReport {
  std::size_t segments = 0;
  int length = 0;
  int embedding_dim = 0;
  std::vector<double> seconds;  // per timed repetition
  std::optional<double> ips_mean;  // empty when no segments were timed
  std::optional<double> ips_std;
  std::optional<double> latency_mean;  // seconds per segment
  std::size_t model_parameters = 0;
  std::size_t head_parameters = 0;
  std::size_t parameter_count() const { return model_parameters + head_parameters; }
};

// Times closed-form embedding plus head forward pass over synthetic segments.
// An explicit checkpoint must exist. Without one, the default checkpoint is
// used if present, else seeded random parameters of the bench_* sizes.
BenchmarkReport cmd_benchmark(const RunConfig& cfg);

struct HistogramResult {
  std::string factor;
  std::vector<int> dims;
  std::vector<Histogram> histograms;
  std::vector<Moments> moments;
};

// Pooled per-dimension histograms of the raw aligned features of hist_factor
// ("w" for word vectors). Writes histogram_<factor>.tsv and moments_<factor>.tsv.
HistogramResult cmd_histogram(const RunConfig& cfg);

}  // namespace mmb

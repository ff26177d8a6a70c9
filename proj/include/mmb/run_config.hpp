#pragma once

// Flat `key = value` run configuration. Lines starting with '#' are comments.
// The first non-comment key must be `schema_version`.

#include "mmb/head.hpp"
#include "mmb/learning.hpp"
#include "mmb/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmb {

inline constexpr int kRunConfigSchema = 1;

struct RunConfig {
  // paths
  std::string dataset;
  std::string word_vectors;
  std::string out = "out";
  std::string embeddings;  // defaults to <out>/embeddings.tsv
  std::string checkpoint;  // defaults to <out>/checkpoint.txt
  std::string classifier;  // defaults to <out>/classifier.txt

  // model
  Mode mode = Mode::b1;
  double beta = 1e-3;
  std::optional<double> alpha;  // overrides beta when set
  double Z = 1.0;
  double alpha_w = 1.0, alpha_v = 1.0, alpha_a = 1.0;
  double alpha_wv = 1.0, alpha_wa = 1.0, alpha_va = 1.0, alpha_wva = 1.0;
  bool normalize_embeddings = true;

  // parameter learning
  int iterations = 20;
  int inner_steps = 1;
  double lr = 1e-3;
  double tolerance = 1e-6;  // early stop; 0 runs every iteration

  // prediction head
  TaskKind task = TaskKind::regression;
  int classes = 2;
  std::vector<int> hidden = {64};
  int clf_epochs = 200;
  int clf_batch = 32;
  double clf_lr = 1e-2;
  int finetune_steps = 10;
  double finetune_lr = 1e-2;
  bool finetune_renormalize = true;
  bool finetune_update_head = true;

  // experiment
  bool text_only = false;
  bool no_pe = false;
  bool no_finetune = false;
  double label_fraction = 1.0;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  // benchmark
  int bench_segments = 1000;
  int bench_length = 20;
  int bench_repetitions = 5;
  int bench_embedding_dim = 64;
  int bench_visual_dim = 16;
  int bench_acoustic_dim = 8;

  // histogram
  std::string hist_factor = "v";
  std::vector<int> hist_dims;  // empty: all dimensions
  int hist_bins = 30;

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  std::vector<std::string> keys() const;

  // Resolved configuration, including schema_version, as key = value text.
  std::string to_text() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  std::string embeddings_path() const;
  std::string checkpoint_path() const;
  std::string classifier_path() const;

  // Temperatures after ablation flags are applied.
  TemperatureConfig temperatures() const;
  FitOptions fit_options() const;
  void validate() const;
};

}  // namespace mmb

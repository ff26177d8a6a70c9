#include "mmb/experiment.hpp"

#include "mmb/checkpoint.hpp"
#include "mmb/error.hpp"
#include "mmb/head.hpp"
#include "mmb/solver.hpp"
#include "mmb/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace mmb {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + path.string() + "'");
  return out;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::io,
          "cannot create output directory '" + cfg.out + "'");
  auto out = open_output(dir / "resolved_config.txt");
  out << cfg.to_text();
  return dir;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

ModelParams random_params(Mode mode, int dm, int dv, int da, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mean_weight(-0.1, 0.1);
  std::uniform_real_distribution<double> scale_weight(-0.01, 0.01);
  ModelParams params;
  params.embedding_dim = dm;
  for (Factor f : factors_for(mode)) {
    const Constituents c = constituents(f);
    const int df = (c.words ? dm : 0) + (c.visual ? dv : 0) + (c.acoustic ? da : 0);
    FactorParams fp(f, df, dm);
    for (Eigen::Index i = 0; i < fp.w_mu.size(); ++i) fp.w_mu.data()[i] = mean_weight(rng);
    for (Eigen::Index i = 0; i < fp.w_sigma.size(); ++i) fp.w_sigma.data()[i] = scale_weight(rng);
    params.factors.emplace(f, std::move(fp));
  }
  return params;
}

std::vector<EmbeddingRow> rows_for(const std::vector<SegmentRecord>& records,
                                   const std::vector<SegmentFeatures>& features,
                                   std::span<const UtteranceEmbedding> embeddings,
                                   const ModelParams& params, const WordTable& table,
                                   const TemperatureConfig& tc, bool normalized) {
  std::vector<EmbeddingRow> rows;
  rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EmbeddingRow row;
    row.id = records[i].id;
    row.split = records[i].split;
    row.label = records[i].label;
    row.degenerate = embeddings[i].degenerate;
    row.m = normalized ? embeddings[i].m
                       : taylor_linear_coefficient(features[i], params, table, tc);
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

Split split_rows(const std::vector<EmbeddingRow>& rows, double test_fraction, std::uint64_t seed) {
  Split s;
  std::vector<std::size_t> unassigned;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].split == "train")
      s.train.push_back(i);
    else if (rows[i].split == "test")
      s.test.push_back(i);
    else if (rows[i].split.empty())
      unassigned.push_back(i);
  }
  if (!unassigned.empty()) {
    std::mt19937_64 rng(seed);
    std::shuffle(unassigned.begin(), unassigned.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(unassigned.size())));
    s.test.insert(s.test.end(), unassigned.begin(), unassigned.begin() + n_test);
    s.train.insert(s.train.end(), unassigned.begin() + n_test, unassigned.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<EmbeddingRow> embeddings_for_eval(const RunConfig& cfg) {
  if (fs::exists(cfg.embeddings_path())) return read_embeddings(cfg.embeddings_path());
  require(fs::exists(cfg.checkpoint_path()), ErrorKind::io,
          "neither embeddings '" + cfg.embeddings_path() + "' nor checkpoint '" +
              cfg.checkpoint_path() + "' exists");
  const ModelCheckpoint ckpt = load_checkpoint(cfg.checkpoint_path());
  LoadedDataset data = load_dataset(cfg);
  const auto features =
      prepare_all(data.segments, PipelineOptions{ckpt.config.mode, !cfg.no_pe});
  const auto embeddings = embed_all(features, ckpt.params, data.table, ckpt.config);
  return rows_for(data.records, features, embeddings, ckpt.params, data.table, ckpt.config,
                  cfg.normalize_embeddings);
}

}  // namespace

LoadedDataset load_dataset(const RunConfig& cfg) {
  require(!cfg.dataset.empty(), ErrorKind::config, "config key 'dataset' is not set");
  require(!cfg.word_vectors.empty(), ErrorKind::config, "config key 'word_vectors' is not set");
  LoadedDataset data;
  data.records = load_segment_records(cfg.dataset, &data.info);
  data.table = load_word_vectors(cfg.word_vectors);
  data.segments = build_segments(data.records, data.table, data.info);
  return data;
}

PipelineOptions pipeline_options(const RunConfig& cfg) {
  return PipelineOptions{cfg.mode, !cfg.no_pe};
}

void write_embeddings(const std::string& path, const std::vector<EmbeddingRow>& rows) {
  auto out = open_output(path);
  const Eigen::Index dim = rows.empty() ? 0 : rows.front().m.size();
  out << "id\tsplit\tlabel\tdegenerate";
  for (Eigen::Index k = 0; k < dim; ++k) out << "\tm" << k;
  out << '\n';
  for (const auto& r : rows) {
    require(r.m.size() == dim, ErrorKind::dimension, "embedding rows differ in dimension");
    require(r.id.find_first_of("\t\n") == std::string::npos, ErrorKind::data,
            "segment id contains a tab or newline");
    out << r.id << '\t' << r.split << '\t' << format_optional(r.label) << '\t'
        << (r.degenerate ? 1 : 0);
    for (Eigen::Index k = 0; k < dim; ++k) out << '\t' << format_double(r.m[k]);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::io, "failed writing '" + path + "'");
}

std::vector<EmbeddingRow> read_embeddings(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open embeddings '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::parse,
          "embeddings '" + path + "' is empty");
  const auto header = split_tabs(line);
  require(header.size() >= 4 && header[0] == "id", ErrorKind::parse,
          "embeddings '" + path + "' has an unexpected header");
  const std::size_t dim = header.size() - 4;
  std::vector<EmbeddingRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_tabs(line);
    const std::string where = path + " line " + std::to_string(lineno) + ": ";
    require(cells.size() == header.size(), ErrorKind::parse, where + "wrong number of columns");
    EmbeddingRow r;
    r.id = cells[0];
    r.split = cells[1];
    try {
      if (cells[2] != "NA") r.label = parse_double(cells[2]);
      r.degenerate = cells[3] == "1";
      r.m.resize(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < dim; ++k) r.m[static_cast<Eigen::Index>(k)] = parse_double(cells[4 + k]);
    } catch (const Error& e) {
      fail(ErrorKind::parse, where + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::size_t> nested_label_subset(std::size_t n, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::config,
          "label fraction must lie in (0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

FitResult cmd_fit(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = prepare_out_dir(cfg);
  LoadedDataset data = load_dataset(cfg);
  const TemperatureConfig tc = cfg.temperatures();
  const auto features = prepare_all(data.segments, pipeline_options(cfg));
  std::vector<std::string> ids;
  for (const auto& s : data.segments) ids.push_back(s.id);

  FitResult result;
  try {
    result.state = coordinate_ascent_fit(features, ids, data.table, tc, cfg.fit_options());
  } catch (const FitAborted& e) {
    const TrainState& good = e.last_good();
    save_checkpoint(cfg.checkpoint_path(),
                    {good.params, tc, good.optimizer, good.iteration, good.history});
    fail(ErrorKind::numeric, std::string(e.what()) + " (last good state saved to " +
                                 cfg.checkpoint_path() + ")");
  }
  const TrainState& st = result.state;
  save_checkpoint(cfg.checkpoint_path(), {st.params, tc, st.optimizer, st.iteration, st.history});
  result.rows = rows_for(data.records, features, st.embeddings, st.params, data.table, tc,
                         cfg.normalize_embeddings);
  write_embeddings(cfg.embeddings_path(), result.rows);

  auto obj = open_output(dir / "objective.tsv");
  obj << "iteration\tobjective\n";
  for (std::size_t i = 0; i < st.history.size(); ++i)
    obj << i + 1 << '\t' << format_double(st.history[i]) << '\n';
  return result;
}

TrainEvalResult cmd_train_eval(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = prepare_out_dir(cfg);
  std::vector<EmbeddingRow> rows = embeddings_for_eval(cfg);
  require(!rows.empty(), ErrorKind::data, "no embeddings to train on");
  const Split split = split_rows(rows, cfg.test_fraction, cfg.seed);
  require(!split.test.empty(), ErrorKind::data, "the test split is empty");
  for (std::size_t i : split.test)
    require(rows[i].label.has_value(), ErrorKind::data,
            "missing label for test segment " + rows[i].id);

  std::vector<std::size_t> labeled_train;
  for (std::size_t i : split.train)
    if (rows[i].label) labeled_train.push_back(i);
  require(!labeled_train.empty(), ErrorKind::data, "missing labels: no labeled training segments");
  std::vector<std::size_t> labeled;
  for (std::size_t k : nested_label_subset(labeled_train.size(), cfg.label_fraction, cfg.seed))
    labeled.push_back(labeled_train[k]);
  require(!labeled.empty(), ErrorKind::data, "label_fraction leaves no labeled segments");

  TrainEvalResult result;
  result.train_count = split.train.size();
  result.labeled_count = labeled.size();
  result.test_count = split.test.size();

  std::vector<Vec> inputs;
  std::vector<double> targets;
  for (std::size_t i : labeled) {
    inputs.push_back(rows[i].m);
    targets.push_back(*rows[i].label);
    result.labeled_ids.push_back(rows[i].id);
  }
  ClassifierHyper hyper;
  hyper.hidden = cfg.hidden;
  hyper.task = cfg.task;
  hyper.classes = cfg.classes;
  hyper.epochs = cfg.clf_epochs;
  hyper.batch_size = cfg.clf_batch;
  hyper.lr = cfg.clf_lr;
  hyper.seed = cfg.seed;
  MlpModel head = train_classifier(inputs, targets, hyper);

  if (!cfg.no_finetune && cfg.finetune_steps > 0) {
    std::vector<Vec> train_embeddings;
    std::vector<std::optional<double>> train_labels;
    std::vector<bool> in_subset(rows.size(), false);
    for (std::size_t i : labeled) in_subset[i] = true;
    for (std::size_t i : split.train) {
      train_embeddings.push_back(rows[i].m);
      train_labels.push_back(in_subset[i] ? rows[i].label : std::nullopt);
    }
    FineTuneHyper ft;
    ft.steps = cfg.finetune_steps;
    ft.lr = cfg.finetune_lr;
    ft.renormalize = cfg.finetune_renormalize;
    ft.update_model = cfg.finetune_update_head;
    const auto tuned = fine_tune_embeddings(train_embeddings, train_labels, head, ft);
    for (std::size_t j = 0; j < split.train.size(); ++j) rows[split.train[j]].m = tuned[j];
    result.fine_tuned = true;
  }
  save_mlp(cfg.classifier_path(), head);

  std::vector<double> preds, labels;
  for (std::size_t i : split.test) {
    preds.push_back(mlp_predict(rows[i].m, head));
    labels.push_back(*rows[i].label);
  }
  const TaskSpec spec = cfg.task == TaskKind::regression ? TaskSpec::sentiment()
                                                         : TaskSpec::class_indices(cfg.classes);
  result.report = evaluate(preds, labels, spec);
  const MetricReport& r = result.report;
  for (double v : preds)
    require(std::isfinite(v), ErrorKind::numeric, "non-finite prediction");

  auto pred_out = open_output(dir / "predictions.tsv");
  pred_out << "id\tlabel\tprediction\n";
  for (std::size_t j = 0; j < split.test.size(); ++j)
    pred_out << rows[split.test[j]].id << '\t' << format_double(labels[j]) << '\t'
             << format_double(preds[j]) << '\n';

  auto accuracy = [&](int k) -> std::optional<double> {
    auto it = r.accuracy.find(k);
    return it == r.accuracy.end() ? std::nullopt : std::optional<double>(it->second);
  };
  const int primary = spec.accuracies.front().classes;
  auto out = open_output(dir / "metrics.tsv");
  out << "mode\ttext_only\tno_pe\tno_finetune\tlabel_fraction\tseed\ttask\tn_train\tn_labeled"
         "\tn_test\taccuracy\tacc2\tacc7\tf1\tmae\tpearson_r\n";
  out << to_string(cfg.mode) << '\t' << cfg.text_only << '\t' << cfg.no_pe << '\t'
      << cfg.no_finetune << '\t' << format_double(cfg.label_fraction) << '\t' << cfg.seed << '\t'
      << (cfg.task == TaskKind::regression ? "regression" : "classification") << '\t'
      << result.train_count << '\t' << result.labeled_count << '\t' << result.test_count << '\t'
      << format_optional(accuracy(primary)) << '\t' << format_optional(accuracy(2)) << '\t'
      << format_optional(accuracy(7)) << '\t' << format_double(r.f1) << '\t'
      << format_double(r.mae) << '\t' << format_optional(r.pearson_r) << '\n';
  return result;
}

BenchmarkReport cmd_benchmark(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = prepare_out_dir(cfg);

  ModelParams params;
  TemperatureConfig tc;
  if (!cfg.checkpoint.empty() || fs::exists(cfg.checkpoint_path())) {
    ModelCheckpoint ckpt = load_checkpoint(cfg.checkpoint_path());
    params = std::move(ckpt.params);
    tc = ckpt.config;
  } else {
    tc = cfg.temperatures();
    params = random_params(cfg.mode, cfg.bench_embedding_dim, cfg.bench_visual_dim,
                           cfg.bench_acoustic_dim, cfg.seed);
  }
  params.validate(tc.mode);
  const int dm = params.embedding_dim;

  SyntheticSpec spec;
  spec.segments = cfg.bench_segments;
  spec.length = cfg.bench_length;
  spec.embedding_dim = dm;
  spec.visual_dim = params.at(Factor::v).feature_dim();
  spec.acoustic_dim = params.at(Factor::a).feature_dim();
  spec.vocabulary = 1000;
  spec.seed = cfg.seed;
  const SyntheticData data = generate_synthetic(spec);
  const auto features = prepare_all(data.segments, PipelineOptions{tc.mode, !cfg.no_pe});

  MlpModel head;
  const int out_dim = cfg.task == TaskKind::regression ? 1 : cfg.classes;
  if (fs::exists(cfg.classifier_path())) head = load_mlp(cfg.classifier_path());
  if (head.input_dim() != dm) head = make_mlp(dm, cfg.hidden, out_dim, cfg.task, cfg.seed);

  double sink = 0.0;
  auto pass = [&] {
    const auto embeddings = embed_all(features, params, data.table, tc);
    for (const auto& e : embeddings) sink += mlp_forward(e.m, head)[0];
  };
  pass();  // warm-up

  BenchmarkReport report;
  report.segments = features.size();
  report.length = cfg.bench_length;
  report.embedding_dim = dm;
  report.model_parameters = params.parameter_count();
  report.head_parameters = head.parameter_count();
  for (int rep = 0; rep < cfg.bench_repetitions; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    pass();
    const auto t1 = std::chrono::steady_clock::now();
    report.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  require(std::isfinite(sink), ErrorKind::numeric, "benchmark produced non-finite outputs");

  if (report.segments > 0) {
    std::vector<double> ips;
    for (double s : report.seconds) ips.push_back(static_cast<double>(report.segments) / s);
    const double n = static_cast<double>(ips.size());
    const double mean = std::accumulate(ips.begin(), ips.end(), 0.0) / n;
    double var = 0.0;
    for (double v : ips) var += (v - mean) * (v - mean);
    report.ips_mean = mean;
    report.ips_std = std::sqrt(var / (n - 1.0));
    report.latency_mean = std::accumulate(report.seconds.begin(), report.seconds.end(), 0.0) /
                          n / static_cast<double>(report.segments);
  }

  auto out = open_output(dir / "benchmark.tsv");
  out << "segments\tlength\tembedding_dim\tmode\trepetitions\tips_defined\tips_mean\tips_std"
         "\tlatency_mean_s\tparameter_count\tmodel_parameters\thead_parameters\n";
  out << report.segments << '\t' << report.length << '\t' << dm << '\t' << to_string(tc.mode)
      << '\t' << report.seconds.size() << '\t' << (report.ips_mean ? 1 : 0) << '\t'
      << format_optional(report.ips_mean) << '\t' << format_optional(report.ips_std) << '\t'
      << format_optional(report.latency_mean) << '\t' << report.parameter_count() << '\t'
      << report.model_parameters << '\t' << report.head_parameters << '\n';
  auto runs = open_output(dir / "benchmark_runs.tsv");
  runs << "repetition\tseconds\n";
  for (std::size_t i = 0; i < report.seconds.size(); ++i)
    runs << i + 1 << '\t' << format_double(report.seconds[i]) << '\n';
  return report;
}

HistogramResult cmd_histogram(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = prepare_out_dir(cfg);
  LoadedDataset data = load_dataset(cfg);

  std::vector<const Mat*> blocks;
  std::vector<SegmentFeatures> features;
  if (cfg.hist_factor == "w") {
    for (const auto& s : data.segments) blocks.push_back(&s.words);
  } else {
    const Factor f = factor_from_string(cfg.hist_factor);
    features = prepare_all(data.segments, PipelineOptions{Mode::b2, false});
    for (const auto& s : features) blocks.push_back(&s.factor(f));
  }
  Eigen::Index rows = 0, cols = 0;
  for (const Mat* b : blocks) {
    if (b->cols() == 0) continue;
    rows = b->rows();
    cols += b->cols();
  }
  require(rows > 0 && cols > 0, ErrorKind::data,
          "factor '" + cfg.hist_factor + "' has no feature values");

  HistogramResult result;
  result.factor = cfg.hist_factor;
  result.dims = cfg.hist_dims;
  if (result.dims.empty()) {
    result.dims.resize(static_cast<std::size_t>(rows));
    std::iota(result.dims.begin(), result.dims.end(), 0);
  }
  for (int d : result.dims) {
    require(d < rows, ErrorKind::config,
            "hist_dims entry " + std::to_string(d) + " exceeds factor dimension " +
                std::to_string(rows));
    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(cols));
    for (const Mat* b : blocks)
      for (Eigen::Index t = 0; t < b->cols(); ++t) pooled.push_back((*b)(d, t));
    result.histograms.push_back(histogram(pooled, cfg.hist_bins));
    result.moments.push_back(moments(pooled));
  }

  auto hist = open_output(dir / ("histogram_" + cfg.hist_factor + ".tsv"));
  hist << "dim\tbin\tlower\tupper\tcount\n";
  for (std::size_t j = 0; j < result.dims.size(); ++j) {
    const Histogram& h = result.histograms[j];
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      hist << result.dims[j] << '\t' << b << '\t' << format_double(h.edges[b]) << '\t'
           << format_double(h.edges[b + 1]) << '\t' << h.counts[b] << '\n';
  }
  auto mom = open_output(dir / ("moments_" + cfg.hist_factor + ".tsv"));
  mom << "dim\tn\tmean\tstddev\tskewness\texcess_kurtosis\n";
  for (std::size_t j = 0; j < result.dims.size(); ++j) {
    const Moments& m = result.moments[j];
    mom << result.dims[j] << '\t' << m.n << '\t' << format_double(m.mean) << '\t'
        << format_double(m.stddev) << '\t' << format_double(m.skewness) << '\t'
        << format_double(m.excess_kurtosis) << '\n';
  }
  return result;
}

}  // namespace mmb

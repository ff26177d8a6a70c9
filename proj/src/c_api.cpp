#include "mmb/mmb.h"

#include "mmb/checkpoint.hpp"
#include "mmb/error.hpp"
#include "mmb/experiment.hpp"
#include "mmb/solver.hpp"

#include <cstring>
#include <new>
#include <string>

struct mmb_config {
  mmb::RunConfig cfg;
};

struct mmb_model {
  mmb::ModelCheckpoint ckpt;
};

struct mmb_dataset {
  mmb::LoadedDataset data;
  mmb::Mode mode = mmb::Mode::b1;
  std::vector<mmb::SegmentFeatures> features;
};

namespace {

thread_local std::string last_error;

mmb_status status_for(mmb::ErrorKind kind) {
  switch (mmb::exit_code_for(kind)) {
    case 1: return MMB_ERR_CONFIG;
    case 3: return MMB_ERR_NUMERIC;
    default: return MMB_ERR_DATA;
  }
}

template <typename Fn>
mmb_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return MMB_OK;
  } catch (const mmb::Error& e) {
    last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MMB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MMB_ERR_INTERNAL;
  }
}

mmb_status bad_argument(const char* what) {
  last_error = what;
  return MMB_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* mmb_version(void) { return "1.0.0"; }

const char* mmb_last_error(void) { return last_error.c_str(); }

int mmb_exit_code(mmb_status status) {
  switch (status) {
    case MMB_OK: return 0;
    case MMB_ERR_CONFIG:
    case MMB_ERR_ARGUMENT: return 1;
    case MMB_ERR_NUMERIC: return 3;
    default: return 2;
  }
}

mmb_status mmb_config_new(mmb_config** out) {
  if (!out) return bad_argument("out is NULL");
  return guarded([&] { *out = new mmb_config{}; });
}

mmb_status mmb_config_load(const char* path, mmb_config** out) {
  if (!path || !out) return bad_argument("path or out is NULL");
  return guarded([&] { *out = new mmb_config{mmb::RunConfig::load(path)}; });
}

mmb_status mmb_config_parse(const char* text, mmb_config** out) {
  if (!text || !out) return bad_argument("text or out is NULL");
  return guarded([&] { *out = new mmb_config{mmb::RunConfig::parse(text)}; });
}

mmb_status mmb_config_set(mmb_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return bad_argument("config, key or value is NULL");
  return guarded([&] { cfg->cfg.set(key, value); });
}

mmb_status mmb_config_get(const mmb_config* cfg, const char* key, char* buf, size_t size,
                          size_t* needed) {
  if (!cfg || !key) return bad_argument("config or key is NULL");
  return guarded([&] {
    const std::string value = cfg->cfg.get(key);
    if (needed) *needed = value.size() + 1;
    if (buf && size > 0) {
      const std::size_t n = std::min(size - 1, value.size());
      std::memcpy(buf, value.data(), n);
      buf[n] = '\0';
    }
  });
}

void mmb_config_free(mmb_config* cfg) { delete cfg; }

mmb_status mmb_cmd_fit(const mmb_config* cfg, mmb_fit_summary* summary) {
  if (!cfg) return bad_argument("config is NULL");
  return guarded([&] {
    const mmb::FitResult r = mmb::cmd_fit(cfg->cfg);
    if (!summary) return;
    summary->iterations = r.state.iteration;
    summary->initial_objective = r.state.initial_objective;
    summary->final_objective =
        r.state.history.empty() ? r.state.initial_objective : r.state.history.back();
    summary->segments = r.rows.size();
    summary->degenerate = 0;
    for (const auto& row : r.rows) summary->degenerate += row.degenerate;
  });
}

mmb_status mmb_cmd_train_eval(const mmb_config* cfg, mmb_eval_summary* summary) {
  if (!cfg) return bad_argument("config is NULL");
  return guarded([&] {
    const mmb::TrainEvalResult r = mmb::cmd_train_eval(cfg->cfg);
    if (!summary) return;
    summary->accuracy = r.report.accuracy.empty() ? 0.0 : r.report.accuracy.begin()->second;
    summary->f1 = r.report.f1;
    summary->mae = r.report.mae;
    summary->pearson_defined = r.report.pearson_r.has_value();
    summary->pearson_r = r.report.pearson_r.value_or(0.0);
    summary->n_train = r.train_count;
    summary->n_labeled = r.labeled_count;
    summary->n_test = r.test_count;
    summary->fine_tuned = r.fine_tuned;
  });
}

mmb_status mmb_cmd_benchmark(const mmb_config* cfg, mmb_benchmark_summary* summary) {
  if (!cfg) return bad_argument("config is NULL");
  return guarded([&] {
    const mmb::BenchmarkReport r = mmb::cmd_benchmark(cfg->cfg);
    if (!summary) return;
    summary->segments = r.segments;
    summary->repetitions = static_cast<int>(r.seconds.size());
    summary->ips_defined = r.ips_mean.has_value();
    summary->ips_mean = r.ips_mean.value_or(0.0);
    summary->ips_std = r.ips_std.value_or(0.0);
    summary->total_seconds = 0.0;
    for (double s : r.seconds) summary->total_seconds += s;
    summary->parameter_count = r.parameter_count();
  });
}

mmb_status mmb_cmd_histogram(const mmb_config* cfg, mmb_histogram_summary* summary) {
  if (!cfg) return bad_argument("config is NULL");
  return guarded([&] {
    const mmb::HistogramResult r = mmb::cmd_histogram(cfg->cfg);
    if (!summary) return;
    summary->dims = r.dims.size();
    summary->samples_per_dim = r.moments.empty() ? 0 : r.moments.front().n;
  });
}

mmb_status mmb_model_load(const char* checkpoint_path, mmb_model** out) {
  if (!checkpoint_path || !out) return bad_argument("path or out is NULL");
  return guarded([&] { *out = new mmb_model{mmb::load_checkpoint(checkpoint_path)}; });
}

int mmb_model_embedding_dim(const mmb_model* model) {
  return model ? model->ckpt.params.embedding_dim : 0;
}

size_t mmb_model_parameter_count(const mmb_model* model) {
  return model ? model->ckpt.params.parameter_count() : 0;
}

void mmb_model_free(mmb_model* model) { delete model; }

mmb_status mmb_dataset_load(const mmb_config* cfg, mmb_dataset** out) {
  if (!cfg || !out) return bad_argument("config or out is NULL");
  return guarded([&] {
    auto* d = new mmb_dataset{mmb::load_dataset(cfg->cfg), cfg->cfg.mode, {}};
    try {
      d->features = mmb::prepare_all(d->data.segments, mmb::pipeline_options(cfg->cfg));
    } catch (...) {
      delete d;
      throw;
    }
    *out = d;
  });
}

size_t mmb_dataset_size(const mmb_dataset* data) { return data ? data->features.size() : 0; }

void mmb_dataset_free(mmb_dataset* data) { delete data; }

namespace {

mmb_status check_pair(const mmb_model* model, const mmb_dataset* data, size_t index, size_t dim) {
  if (!model || !data) return bad_argument("model or dataset is NULL");
  if (index >= data->features.size()) return bad_argument("segment index out of range");
  if (dim != static_cast<size_t>(model->ckpt.params.embedding_dim))
    return bad_argument("dim does not match the model's embedding dimension");
  if (model->ckpt.config.mode == mmb::Mode::b2 && data->mode != mmb::Mode::b2)
    return bad_argument("dataset was prepared for B1 but the model is B2");
  return MMB_OK;
}

}  // namespace

mmb_status mmb_embed(const mmb_model* model, const mmb_dataset* data, size_t index, double* out,
                     size_t dim, int* degenerate) {
  if (mmb_status s = check_pair(model, data, index, dim); s != MMB_OK) return s;
  if (!out) return bad_argument("out is NULL");
  return guarded([&] {
    const auto e = mmb::closed_form_embedding(data->features[index], model->ckpt.params,
                                              data->data.table, model->ckpt.config);
    std::copy(e.m.data(), e.m.data() + dim, out);
    if (degenerate) *degenerate = e.degenerate;
  });
}

mmb_status mmb_log_likelihood(const mmb_model* model, const mmb_dataset* data, size_t index,
                              const double* m, size_t dim, double* out) {
  if (mmb_status s = check_pair(model, data, index, dim); s != MMB_OK) return s;
  if (!m || !out) return bad_argument("m or out is NULL");
  return guarded([&] {
    const mmb::Vec v = Eigen::Map<const mmb::Vec>(m, static_cast<Eigen::Index>(dim));
    *out = mmb::segment_log_likelihood(data->features[index], v, model->ckpt.params,
                                       data->data.table, model->ckpt.config);
  });
}

}  // extern "C"

#ifndef MMB_MMB_H
#define MMB_MMB_H

/* C interface to the multimodal utterance embedding library.
 *
 * Every function returns an mmb_status. On failure, mmb_last_error() gives a
 * message for the calling thread until its next call into the library.
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function (NULL is accepted). */

#include <stddef.h>
#include <stdint.h>

#if defined(MMB_BUILDING_LIBRARY)
#define MMB_API __attribute__((visibility("default")))
#else
#define MMB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmb_status {
  MMB_OK = 0,
  MMB_ERR_CONFIG = 1,   /* invalid configuration or usage */
  MMB_ERR_DATA = 2,     /* unreadable, malformed or inconsistent input */
  MMB_ERR_NUMERIC = 3,  /* non-finite values during computation */
  MMB_ERR_ARGUMENT = 4, /* NULL handle or out-of-range argument */
  MMB_ERR_INTERNAL = 5
} mmb_status;

typedef struct mmb_config mmb_config;
typedef struct mmb_model mmb_model;
typedef struct mmb_dataset mmb_dataset;

MMB_API const char* mmb_version(void);
MMB_API const char* mmb_last_error(void);
/* Process exit code for a status: 0, 1 usage/config, 2 data, 3 numeric. */
MMB_API int mmb_exit_code(mmb_status status);

/* Run configuration (flat key = value text with schema_version). */
MMB_API mmb_status mmb_config_new(mmb_config** out);
MMB_API mmb_status mmb_config_load(const char* path, mmb_config** out);
MMB_API mmb_status mmb_config_parse(const char* text, mmb_config** out);
MMB_API mmb_status mmb_config_set(mmb_config* cfg, const char* key, const char* value);
/* Copies the value with a terminating NUL; *needed receives the full length + 1. */
MMB_API mmb_status mmb_config_get(const mmb_config* cfg, const char* key, char* buf, size_t size,
                                  size_t* needed);
MMB_API void mmb_config_free(mmb_config* cfg);

typedef struct mmb_fit_summary {
  int iterations;
  double initial_objective;
  double final_objective;
  size_t segments;
  size_t degenerate;
} mmb_fit_summary;

typedef struct mmb_eval_summary {
  double accuracy; /* primary accuracy of the task */
  double f1;
  double mae;
  double pearson_r;
  int pearson_defined;
  size_t n_train;
  size_t n_labeled;
  size_t n_test;
  int fine_tuned;
} mmb_eval_summary;

typedef struct mmb_benchmark_summary {
  size_t segments;
  int repetitions;
  int ips_defined;
  double ips_mean;
  double ips_std;
  double total_seconds; /* sum over timed repetitions */
  size_t parameter_count;
} mmb_benchmark_summary;

typedef struct mmb_histogram_summary {
  size_t dims;
  size_t samples_per_dim;
} mmb_histogram_summary;

/* Commands. Summaries may be NULL. */
MMB_API mmb_status mmb_cmd_fit(const mmb_config* cfg, mmb_fit_summary* summary);
MMB_API mmb_status mmb_cmd_train_eval(const mmb_config* cfg, mmb_eval_summary* summary);
MMB_API mmb_status mmb_cmd_benchmark(const mmb_config* cfg, mmb_benchmark_summary* summary);
MMB_API mmb_status mmb_cmd_histogram(const mmb_config* cfg, mmb_histogram_summary* summary);

/* Fitted model from a checkpoint file. */
MMB_API mmb_status mmb_model_load(const char* checkpoint_path, mmb_model** out);
MMB_API int mmb_model_embedding_dim(const mmb_model* model);
MMB_API size_t mmb_model_parameter_count(const mmb_model* model);
MMB_API void mmb_model_free(mmb_model* model);

/* Dataset and word vectors named by the config, aligned and ready to embed.
 * Features are prepared for the model's mode; positional encodings follow
 * the config's no_pe flag. */
MMB_API mmb_status mmb_dataset_load(const mmb_config* cfg, mmb_dataset** out);
MMB_API size_t mmb_dataset_size(const mmb_dataset* data);
MMB_API void mmb_dataset_free(mmb_dataset* data);

/* Closed-form embedding of segment `index`; `out` holds `dim` doubles. */
MMB_API mmb_status mmb_embed(const mmb_model* model, const mmb_dataset* data, size_t index,
                             double* out, size_t dim, int* degenerate);
/* Weighted log-likelihood of segment `index` at embedding `m`. */
MMB_API mmb_status mmb_log_likelihood(const mmb_model* model, const mmb_dataset* data,
                                      size_t index, const double* m, size_t dim, double* out);

#ifdef __cplusplus
}
#endif

#endif /* MMB_MMB_H */

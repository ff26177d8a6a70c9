#pragma once

// Parameter learning: analytic gradients of the segment log-likelihood with
// respect to each factor's linear maps, an adaptive-moment ascent optimizer,
// and the alternating (closed-form embedding / gradient step) fitting loop.

#include "mmb/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace mmb {

struct FactorGradients {
  Mat dw_mu;
  Mat dw_sigma;
  Vec db_mu;
  Vec db_sigma;

  static FactorGradients zeros_like(const FactorParams& fp);
  FactorGradients& operator+=(const FactorGradients& other);
};

struct ParamGradients {
  std::map<Factor, FactorGradients> factors;

  ParamGradients& operator+=(const ParamGradients& other);
};

// Gradient of alpha_f * sum_t log N(x_t | mu(m), sigma(m)) w.r.t. the
// factor's parameters. Coordinates whose sigma sits on the floor have zero
// gradient with respect to the sigma pre-activation.
FactorGradients factor_param_gradients(const Mat& x, const Vec& m, const FactorParams& fp,
                                       double alpha_f);

// Gradient of segment_log_likelihood for every active factor of the mode.
ParamGradients segment_param_gradients(const SegmentFeatures& seg, const Vec& m,
                                       const ModelParams& params, const TemperatureConfig& cfg);

// Parameters and gradients flattened in a fixed order: factors in enum
// order, then w_mu, w_sigma (column-major), b_mu, b_sigma.
Vec flatten(const ModelParams& params);
void unflatten(const Vec& flat, ModelParams& params);
Vec flatten(const ParamGradients& grads, const ModelParams& like);

struct OptimizerConfig {
  bool adaptive = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam-style ascent over a flat parameter vector.
struct OptimizerState {
  OptimizerConfig config;
  Vec first_moment;
  Vec second_moment;
  std::int64_t step = 0;

  // theta += lr * update(grad); gradients point uphill.
  void ascend(Vec& theta, const Vec& grad, double lr);
};

struct FitOptions {
  int iterations = 20;
  int inner_steps = 1;  // gradient steps per closed-form embedding update
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;  // early stop on |dL| < tolerance * |L|; 0 disables
  OptimizerConfig optimizer;
};

struct TrainState {
  ModelParams params;
  std::vector<std::string> ids;
  std::vector<UtteranceEmbedding> embeddings;
  OptimizerState optimizer;
  int iteration = 0;
  double initial_objective = 0.0;
  std::vector<double> history;  // full objective after each completed iteration
};

// Raised when the objective stops being finite; carries the last good state.
class FitAborted : public std::runtime_error {
 public:
  FitAborted(const std::string& what, TrainState last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const TrainState& last_good() const { return last_good_; }

 private:
  TrainState last_good_;
};

// Parameters for the mode's factors: small seeded uniform weights, b_mu at
// the per-dimension data mean and b_sigma at the log data standard deviation.
ModelParams initialize_params(std::span<const SegmentFeatures> data, int embedding_dim,
                              const TemperatureConfig& cfg, std::uint64_t seed);

// Ordered reduction over segments; independent of thread count.
ParamGradients dataset_gradients(std::span<const SegmentFeatures> data,
                                 std::span<const UtteranceEmbedding> embeddings,
                                 const ModelParams& params, const TemperatureConfig& cfg);

double dataset_objective(std::span<const SegmentFeatures> data,
                         std::span<const UtteranceEmbedding> embeddings,
                         const ModelParams& params, const WordTable& table,
                         const TemperatureConfig& cfg);

// Ascent step on all parameters. Throws numeric error naming the factor and
// entry if a gradient is not finite.
void apply_gradient_step(TrainState& state, const ParamGradients& grads, double lr);

TrainState coordinate_ascent_fit(std::span<const SegmentFeatures> data,
                                 std::span<const std::string> ids, const WordTable& table,
                                 const TemperatureConfig& cfg, const FitOptions& options);

// Same, starting from given parameters instead of the data-driven init.
TrainState coordinate_ascent_fit(std::span<const SegmentFeatures> data,
                                 std::span<const std::string> ids, const WordTable& table,
                                 const TemperatureConfig& cfg, const FitOptions& options,
                                 ModelParams initial);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& point,
                               double h);

}  // namespace mmb

#include "mmb/learning.hpp"

#include "mmb/error.hpp"
#include "mmb/solver.hpp"
#include "parallel.hpp"

#include <cmath>
#include <random>

namespace mmb {

namespace {

constexpr std::size_t kGradientBlock = 64;

template <typename Params, typename Fn>
void for_each_tensor(Params& fp, Fn&& fn) {
  fn("w_mu", fp.w_mu.data(), fp.w_mu.size());
  fn("w_sigma", fp.w_sigma.data(), fp.w_sigma.size());
  fn("b_mu", fp.b_mu.data(), fp.b_mu.size());
  fn("b_sigma", fp.b_sigma.data(), fp.b_sigma.size());
}

}  // namespace

FactorGradients FactorGradients::zeros_like(const FactorParams& fp) {
  FactorGradients g;
  g.dw_mu = Mat::Zero(fp.w_mu.rows(), fp.w_mu.cols());
  g.dw_sigma = Mat::Zero(fp.w_sigma.rows(), fp.w_sigma.cols());
  g.db_mu = Vec::Zero(fp.b_mu.size());
  g.db_sigma = Vec::Zero(fp.b_sigma.size());
  return g;
}

FactorGradients& FactorGradients::operator+=(const FactorGradients& other) {
  dw_mu += other.dw_mu;
  dw_sigma += other.dw_sigma;
  db_mu += other.db_mu;
  db_sigma += other.db_sigma;
  return *this;
}

ParamGradients& ParamGradients::operator+=(const ParamGradients& other) {
  for (const auto& [f, g] : other.factors) {
    auto it = factors.find(f);
    if (it == factors.end())
      factors.emplace(f, g);
    else
      it->second += g;
  }
  return *this;
}

FactorGradients factor_param_gradients(const Mat& x, const Vec& m, const FactorParams& fp,
                                       double alpha_f) {
  require(m.size() == fp.embedding_dim(), ErrorKind::dimension,
          std::string("factor ") + to_string(fp.id) + ": embedding dimension mismatch");
  FactorGradients g = FactorGradients::zeros_like(fp);
  if (x.cols() == 0 || alpha_f == 0.0) return g;
  require(x.rows() == fp.feature_dim(), ErrorKind::dimension,
          std::string("factor ") + to_string(fp.id) + ": feature dimension mismatch");

  const Vec mu = fp.w_mu * m + fp.b_mu;
  const Vec pre = fp.w_sigma * m + fp.b_sigma;
  const Vec raw_sigma = pre.array().exp().matrix();
  const Vec sigma = raw_sigma.cwiseMax(kSigmaFloor);
  const Vec inv_var = sigma.array().square().inverse().matrix();
  // d sigma / d pre is zero where the floor is active.
  const Vec active = (raw_sigma.array() >= kSigmaFloor).cast<double>().matrix();

  const Mat resid = x.colwise() - mu;
  const Vec sum_r = resid.rowwise().sum();
  const Vec sum_r2 = resid.cwiseProduct(resid).rowwise().sum();
  const double steps = static_cast<double>(x.cols());

  g.db_mu = alpha_f * inv_var.cwiseProduct(sum_r);
  g.db_sigma = (-alpha_f * (steps * Vec::Ones(sigma.size()) - inv_var.cwiseProduct(sum_r2)))
                   .cwiseProduct(active);
  g.dw_mu = g.db_mu * m.transpose();
  g.dw_sigma = g.db_sigma * m.transpose();
  return g;
}

ParamGradients segment_param_gradients(const SegmentFeatures& seg, const Vec& m,
                                       const ModelParams& params, const TemperatureConfig& cfg) {
  ParamGradients out;
  for (Factor f : factors_for(cfg.mode)) {
    const FactorParams& fp = params.at(f);
    out.factors.emplace(f, factor_param_gradients(seg.factor(f), m, fp, cfg.temperature(f)));
  }
  return out;
}

Vec flatten(const ModelParams& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for (const auto& [f, fp] : params.factors)
    for_each_tensor(fp, [&](const char*, const double* p, Eigen::Index n) {
      flat.insert(flat.end(), p, p + n);
    });
  return Eigen::Map<const Vec>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void unflatten(const Vec& flat, ModelParams& params) {
  require(static_cast<std::size_t>(flat.size()) == params.parameter_count(), ErrorKind::dimension,
          "flat parameter vector has the wrong length");
  Eigen::Index pos = 0;
  for (auto& [f, fp] : params.factors)
    for_each_tensor(fp, [&](const char*, double* p, Eigen::Index n) {
      std::copy(flat.data() + pos, flat.data() + pos + n, p);
      pos += n;
    });
}

Vec flatten(const ParamGradients& grads, const ModelParams& like) {
  Vec flat(static_cast<Eigen::Index>(like.parameter_count()));
  Eigen::Index pos = 0;
  for (const auto& [f, fp] : like.factors) {
    auto it = grads.factors.find(f);
    const FactorGradients g =
        it == grads.factors.end() ? FactorGradients::zeros_like(fp) : it->second;
    require(g.dw_mu.rows() == fp.w_mu.rows() && g.dw_mu.cols() == fp.w_mu.cols() &&
                g.db_mu.size() == fp.b_mu.size() && g.db_sigma.size() == fp.b_sigma.size() &&
                g.dw_sigma.size() == fp.w_sigma.size(),
            ErrorKind::dimension, std::string("gradient shape mismatch for factor ") + to_string(f));
    auto put = [&](const char* name, const double* p, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(p[i]))
          fail(ErrorKind::numeric, std::string("non-finite gradient in factor ") + to_string(f) +
                                       ", tensor " + name + ", entry " + std::to_string(i));
        flat[pos++] = p[i];
      }
    };
    put("w_mu", g.dw_mu.data(), g.dw_mu.size());
    put("w_sigma", g.dw_sigma.data(), g.dw_sigma.size());
    put("b_mu", g.db_mu.data(), g.db_mu.size());
    put("b_sigma", g.db_sigma.data(), g.db_sigma.size());
  }
  return flat;
}

void OptimizerState::ascend(Vec& theta, const Vec& grad, double lr) {
  require(lr > 0.0, ErrorKind::config, "learning rate must be positive");
  require(theta.size() == grad.size(), ErrorKind::dimension, "gradient length mismatch");
  ++step;
  if (!config.adaptive) {
    theta += lr * grad;
    return;
  }
  if (first_moment.size() != theta.size()) {
    first_moment = Vec::Zero(theta.size());
    second_moment = Vec::Zero(theta.size());
  }
  first_moment = config.beta1 * first_moment + (1.0 - config.beta1) * grad;
  second_moment =
      config.beta2 * second_moment + (1.0 - config.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  theta.array() += lr * (first_moment.array() / c1) /
                   ((second_moment.array() / c2).sqrt() + config.epsilon);
}

ModelParams initialize_params(std::span<const SegmentFeatures> data, int embedding_dim,
                              const TemperatureConfig& cfg, std::uint64_t seed) {
  require(!data.empty(), ErrorKind::data, "cannot initialize parameters from an empty dataset");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.01, 0.01);

  ModelParams params;
  params.embedding_dim = embedding_dim;
  for (Factor f : factors_for(cfg.mode)) {
    const auto df = static_cast<int>(data.front().factor(f).rows());
    FactorParams fp(f, df, embedding_dim);
    for (Eigen::Index i = 0; i < fp.w_mu.size(); ++i) fp.w_mu.data()[i] = uniform(rng);
    for (Eigen::Index i = 0; i < fp.w_sigma.size(); ++i) fp.w_sigma.data()[i] = uniform(rng);

    Vec sum = Vec::Zero(df);
    Vec sum_sq = Vec::Zero(df);
    double count = 0.0;
    for (const auto& seg : data) {
      const Mat& x = seg.factor(f);
      if (x.cols() == 0) continue;
      require(x.rows() == df, ErrorKind::dimension,
              std::string("factor ") + to_string(f) + " dimension differs across segments");
      sum += x.rowwise().sum();
      count += static_cast<double>(x.cols());
    }
    if (count > 0.0) {
      fp.b_mu = sum / count;
      for (const auto& seg : data) {
        const Mat& x = seg.factor(f);
        if (x.cols() == 0) continue;
        sum_sq += (x.colwise() - fp.b_mu).cwiseAbs2().rowwise().sum();
      }
      fp.b_sigma = (sum_sq / count).cwiseSqrt().cwiseMax(kSigmaFloor).array().log().matrix();
    }
    params.factors.emplace(f, std::move(fp));
  }
  return params;
}

ParamGradients dataset_gradients(std::span<const SegmentFeatures> data,
                                 std::span<const UtteranceEmbedding> embeddings,
                                 const ModelParams& params, const TemperatureConfig& cfg) {
  require(data.size() == embeddings.size(), ErrorKind::dimension,
          "embedding count does not match dataset size");
  const std::size_t blocks = (data.size() + kGradientBlock - 1) / kGradientBlock;
  std::vector<ParamGradients> partial(blocks);
  detail::parallel_for(
      blocks,
      [&](std::size_t b) {
        ParamGradients acc;
        for (Factor f : factors_for(cfg.mode))
          acc.factors.emplace(f, FactorGradients::zeros_like(params.at(f)));
        const std::size_t end = std::min(data.size(), (b + 1) * kGradientBlock);
        for (std::size_t i = b * kGradientBlock; i < end; ++i)
          acc += segment_param_gradients(data[i], embeddings[i].m, params, cfg);
        partial[b] = std::move(acc);
      },
      1);
  ParamGradients total;
  for (Factor f : factors_for(cfg.mode))
    total.factors.emplace(f, FactorGradients::zeros_like(params.at(f)));
  for (const auto& p : partial) total += p;
  return total;
}

double dataset_objective(std::span<const SegmentFeatures> data,
                         std::span<const UtteranceEmbedding> embeddings,
                         const ModelParams& params, const WordTable& table,
                         const TemperatureConfig& cfg) {
  std::vector<double> per(data.size());
  detail::parallel_for(data.size(), [&](std::size_t i) {
    per[i] = segment_log_likelihood(data[i], embeddings[i].m, params, table, cfg);
  });
  double total = 0.0;
  for (double v : per) total += v;
  return total;
}

void apply_gradient_step(TrainState& state, const ParamGradients& grads, double lr) {
  const Vec g = flatten(grads, state.params);
  Vec theta = flatten(state.params);
  state.optimizer.ascend(theta, g, lr);
  unflatten(theta, state.params);
}

TrainState coordinate_ascent_fit(std::span<const SegmentFeatures> data,
                                 std::span<const std::string> ids, const WordTable& table,
                                 const TemperatureConfig& cfg, const FitOptions& options) {
  require(!data.empty(), ErrorKind::data, "cannot fit an empty dataset");
  return coordinate_ascent_fit(data, ids, table, cfg, options,
                               initialize_params(data, table.dim(), cfg, options.seed));
}

TrainState coordinate_ascent_fit(std::span<const SegmentFeatures> data,
                                 std::span<const std::string> ids, const WordTable& table,
                                 const TemperatureConfig& cfg, const FitOptions& options,
                                 ModelParams initial) {
  require(!data.empty(), ErrorKind::data, "cannot fit an empty dataset");
  require(ids.size() == data.size(), ErrorKind::dimension, "id count does not match dataset size");
  require(options.iterations >= 0 && options.inner_steps >= 1, ErrorKind::config,
          "iterations must be >= 0 and inner_steps >= 1");
  cfg.validate();
  initial.validate(cfg.mode);

  TrainState state;
  state.params = std::move(initial);
  state.ids.assign(ids.begin(), ids.end());
  state.optimizer.config = options.optimizer;
  state.embeddings = embed_all(data, state.params, table, cfg);
  state.initial_objective = dataset_objective(data, state.embeddings, state.params, table, cfg);
  if (!std::isfinite(state.initial_objective))
    fail(ErrorKind::numeric, "initial objective is not finite");

  for (int it = 0; it < options.iterations; ++it) {
    TrainState last_good = state;
    if (it > 0) state.embeddings = embed_all(data, state.params, table, cfg);
    for (int s = 0; s < options.inner_steps; ++s)
      apply_gradient_step(state, dataset_gradients(data, state.embeddings, state.params, cfg),
                          options.lr);
    const double objective = dataset_objective(data, state.embeddings, state.params, table, cfg);
    if (!std::isfinite(objective))
      throw FitAborted("objective became non-finite at iteration " + std::to_string(it),
                       std::move(last_good));
    const double previous = state.history.empty() ? state.initial_objective : state.history.back();
    state.history.push_back(objective);
    state.iteration = it + 1;
    if (options.tolerance > 0.0 &&
        std::abs(objective - previous) < options.tolerance * std::abs(objective))
      break;
  }
  if (state.iteration > 0) state.embeddings = embed_all(data, state.params, table, cfg);
  return state;
}

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& point,
                               double h) {
  require(h > 0.0, ErrorKind::config, "finite-difference step must be positive");
  Vec grad(point.size());
  Vec probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + h;
    const double up = f(probe);
    probe[i] = point[i] - h;
    const double down = f(probe);
    probe[i] = point[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace mmb

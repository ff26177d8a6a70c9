#include "mmb/head.hpp"

#include "mmb/checkpoint.hpp"
#include "mmb/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace mmb {

namespace {

template <typename T>
struct AdamSlot {
  T m, v;
};

template <typename T>
void adam_descend(T& param, const T& grad, AdamSlot<T>& slot, double lr, std::int64_t step) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (slot.m.size() == 0) {
    slot.m = T::Zero(param.rows(), param.cols());
    slot.v = T::Zero(param.rows(), param.cols());
  }
  slot.m = b1 * slot.m + (1 - b1) * grad;
  slot.v = b2 * slot.v + (1 - b2) * grad.cwiseAbs2();
  const double c1 = 1 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1 - std::pow(b2, static_cast<double>(step));
  param.array() -= lr * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + eps);
}

int class_index(double label, int classes) {
  const long idx = std::lround(label);
  require(idx >= 0 && idx < classes && static_cast<double>(idx) == label, ErrorKind::data,
          "classification label " + std::to_string(label) + " is not a class index in [0, " +
              std::to_string(classes) + ")");
  return static_cast<int>(idx);
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

void MlpModel::validate() const {
  require(!weights.empty() && weights.size() == biases.size(), ErrorKind::dimension,
          "MLP needs one bias per weight matrix");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require(biases[l].size() == weights[l].rows(), ErrorKind::dimension, "MLP bias shape mismatch");
    if (l > 0)
      require(weights[l].cols() == weights[l - 1].rows(), ErrorKind::dimension,
              "MLP layer dimensions do not chain");
  }
}

MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, TaskKind task,
                  std::uint64_t seed) {
  require(input_dim > 0 && output_dim > 0, ErrorKind::config, "MLP dimensions must be positive");
  std::mt19937_64 rng(seed);
  MlpModel model;
  model.task = task;
  int in = input_dim;
  std::vector<int> dims = hidden;
  dims.push_back(output_dim);
  for (int out : dims) {
    require(out > 0, ErrorKind::config, "MLP layer widths must be positive");
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in));
    Mat w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vec::Zero(out));
    in = out;
  }
  return model;
}

Vec mlp_forward(const Vec& x, const MlpModel& model) {
  require(x.size() == model.input_dim(), ErrorKind::dimension,
          "MLP input has dimension " + std::to_string(x.size()) + ", expected " +
              std::to_string(model.input_dim()));
  Vec h = x;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    h = model.weights[l] * h + model.biases[l];
    if (l + 1 < model.weights.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

double mlp_predict(const Vec& x, const MlpModel& model) {
  const Vec out = mlp_forward(x, model);
  if (model.task == TaskKind::regression) return out[0];
  Eigen::Index best = 0;
  out.maxCoeff(&best);
  return static_cast<double>(best);
}

MlpGradients mlp_backward(const Vec& x, double label, const MlpModel& model) {
  require(x.size() == model.input_dim(), ErrorKind::dimension, "MLP input dimension mismatch");
  const std::size_t layers = model.weights.size();
  std::vector<Vec> act(layers + 1);  // act[l] is the input to layer l
  std::vector<Vec> pre(layers);
  act[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    pre[l] = model.weights[l] * act[l] + model.biases[l];
    act[l + 1] = (l + 1 < layers) ? Vec(pre[l].cwiseMax(0.0)) : pre[l];
  }

  MlpGradients g;
  Vec delta;
  const Vec& out = act[layers];
  if (model.task == TaskKind::regression) {
    const double diff = out[0] - label;
    g.loss = diff * diff;
    delta = Vec::Constant(1, 2.0 * diff);
  } else {
    const int k = class_index(label, static_cast<int>(out.size()));
    const double hi = out.maxCoeff();
    const Vec e = (out.array() - hi).exp().matrix();
    const double z = e.sum();
    g.loss = -(out[k] - hi - std::log(z));
    delta = e / z;
    delta[k] -= 1.0;
  }

  g.d_weights.resize(layers);
  g.d_biases.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    g.d_weights[l] = delta * act[l].transpose();
    g.d_biases[l] = delta;
    Vec back = model.weights[l].transpose() * delta;
    if (l > 0) back = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    delta = std::move(back);
  }
  g.d_input = std::move(delta);
  return g;
}

double mlp_loss(std::span<const Vec> inputs, std::span<const double> labels, const MlpModel& model) {
  require(inputs.size() == labels.size(), ErrorKind::dimension, "input and label counts differ");
  if (inputs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) total += mlp_backward(inputs[i], labels[i], model).loss;
  return total / static_cast<double>(inputs.size());
}

MlpModel train_classifier(std::span<const Vec> inputs, std::span<const double> labels,
                          const ClassifierHyper& hyper) {
  require(!inputs.empty(), ErrorKind::data, "cannot train a classifier without labeled examples");
  require(inputs.size() == labels.size(), ErrorKind::dimension, "input and label counts differ");
  require(hyper.epochs >= 0 && hyper.batch_size >= 1 && hyper.lr > 0.0, ErrorKind::config,
          "invalid classifier hyperparameters");
  const int out_dim = hyper.task == TaskKind::regression ? 1 : hyper.classes;
  MlpModel model = make_mlp(static_cast<int>(inputs.front().size()), hyper.hidden, out_dim,
                            hyper.task, hyper.seed);
  const std::size_t layers = model.weights.size();
  std::vector<AdamSlot<Mat>> w_slots(layers);
  std::vector<AdamSlot<Vec>> b_slots(layers);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  std::int64_t step = 0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    // Cosine decay to zero over the epoch budget.
    const double lr =
        0.5 * hyper.lr * (1.0 + std::cos(std::numbers::pi * epoch / static_cast<double>(hyper.epochs)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      std::vector<Mat> dw(layers);
      std::vector<Vec> db(layers);
      for (std::size_t l = 0; l < layers; ++l) {
        dw[l] = Mat::Zero(model.weights[l].rows(), model.weights[l].cols());
        db[l] = Vec::Zero(model.biases[l].size());
      }
      for (std::size_t i = start; i < end; ++i) {
        const MlpGradients g = mlp_backward(inputs[order[i]], labels[order[i]], model);
        for (std::size_t l = 0; l < layers; ++l) {
          dw[l] += g.d_weights[l];
          db[l] += g.d_biases[l];
        }
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      ++step;
      for (std::size_t l = 0; l < layers; ++l) {
        adam_descend<Mat>(model.weights[l], dw[l] * scale, w_slots[l], lr, step);
        adam_descend<Vec>(model.biases[l], db[l] * scale, b_slots[l], lr, step);
      }
    }
  }
  model.final_loss = mlp_loss(inputs, labels, model);
  require(std::isfinite(model.final_loss), ErrorKind::numeric, "classifier loss is not finite");
  return model;
}

std::vector<Vec> fine_tune_embeddings(std::span<const Vec> embeddings,
                                      std::span<const std::optional<double>> labels,
                                      MlpModel& model, const FineTuneHyper& hyper) {
  require(embeddings.size() == labels.size(), ErrorKind::dimension,
          "embedding and label counts differ");
  std::vector<Vec> out(embeddings.begin(), embeddings.end());
  if (hyper.lr == 0.0 || hyper.steps <= 0) return out;
  const std::size_t layers = model.weights.size();
  std::size_t labeled = 0;
  for (const auto& l : labels) labeled += l.has_value();
  if (labeled == 0) return out;

  for (int step = 0; step < hyper.steps; ++step) {
    std::vector<Mat> dw(layers);
    std::vector<Vec> db(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      dw[l] = Mat::Zero(model.weights[l].rows(), model.weights[l].cols());
      db[l] = Vec::Zero(model.biases[l].size());
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!labels[i]) continue;
      const MlpGradients g = mlp_backward(out[i], *labels[i], model);
      if (hyper.update_model)
        for (std::size_t l = 0; l < layers; ++l) {
          dw[l] += g.d_weights[l];
          db[l] += g.d_biases[l];
        }
      out[i] -= hyper.lr * g.d_input;
      if (hyper.renormalize) {
        const double n = out[i].norm();
        if (n > 0.0) out[i] /= n;
      }
    }
    if (hyper.update_model) {
      const double scale = hyper.lr / static_cast<double>(labeled);
      for (std::size_t l = 0; l < layers; ++l) {
        model.weights[l] -= scale * dw[l];
        model.biases[l] -= scale * db[l];
      }
    }
  }
  return out;
}

Archive to_archive(const MlpModel& model) {
  model.validate();
  Archive a;
  a.set("kind", std::string("mlp"));
  a.set("task", std::string(model.task == TaskKind::regression ? "regression" : "classification"));
  a.set("layers", std::to_string(model.weights.size()));
  a.set("final_loss", model.final_loss);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    a.put("layer" + std::to_string(l) + ".weight", model.weights[l]);
    a.put("layer" + std::to_string(l) + ".bias", model.biases[l]);
  }
  return a;
}

MlpModel mlp_from(const Archive& a) {
  require(a.get("kind") == "mlp", ErrorKind::parse, "archive does not hold an MLP");
  MlpModel model;
  const std::string& task = a.get("task");
  require(task == "regression" || task == "classification", ErrorKind::parse, "unknown MLP task");
  model.task = task == "regression" ? TaskKind::regression : TaskKind::classification;
  model.final_loss = a.get_double("final_loss");
  const long long layers = a.get_int("layers");
  for (long long l = 0; l < layers; ++l) {
    model.weights.push_back(a.tensor("layer" + std::to_string(l) + ".weight"));
    model.biases.push_back(a.vector("layer" + std::to_string(l) + ".bias"));
  }
  model.validate();
  return model;
}

void save_mlp(const std::string& path, const MlpModel& model) { to_archive(model).write(path); }

MlpModel load_mlp(const std::string& path) { return mlp_from(Archive::read(path)); }

}  // namespace mmb

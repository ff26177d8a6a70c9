#pragma once

// Fully connected prediction head over utterance embeddings, its training
// loop, and fine-tuning of the embeddings themselves under the task loss.

#include "mmb/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mmb {

class Archive;

enum class TaskKind { regression, classification };

struct MlpModel {
  std::vector<Mat> weights;  // layer l maps dim(l) -> dim(l + 1); shape out x in
  std::vector<Vec> biases;
  TaskKind task = TaskKind::regression;
  double final_loss = 0.0;

  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
  std::size_t parameter_count() const;
  void validate() const;
};

// Seeded He-scaled normal weights, zero biases. Output dim is 1 for
// regression and the class count for classification.
MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, TaskKind task,
                  std::uint64_t seed);

// Rectifier on hidden layers, linear output (logits for classification).
Vec mlp_forward(const Vec& x, const MlpModel& model);

// Regression: the scalar output. Classification: argmax class index.
double mlp_predict(const Vec& x, const MlpModel& model);

struct MlpGradients {
  double loss = 0.0;
  std::vector<Mat> d_weights;
  std::vector<Vec> d_biases;
  Vec d_input;
};

// Squared error (regression) or softmax cross-entropy (classification, label
// is the class index) for one example, with gradients.
MlpGradients mlp_backward(const Vec& x, double label, const MlpModel& model);

double mlp_loss(std::span<const Vec> inputs, std::span<const double> labels, const MlpModel& model);

struct ClassifierHyper {
  std::vector<int> hidden = {64};
  TaskKind task = TaskKind::regression;
  int classes = 2;
  int epochs = 200;
  int batch_size = 32;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

// Mini-batch Adam descent on the mean task loss; final_loss is recorded.
MlpModel train_classifier(std::span<const Vec> inputs, std::span<const double> labels,
                          const ClassifierHyper& hyper);

struct FineTuneHyper {
  int steps = 10;
  double lr = 1e-2;
  bool renormalize = true;
  bool update_model = true;  // false: only the embeddings move
};

// Gradient descent on each labeled embedding (labels[i] set) w.r.t. the task
// loss. Unlabeled embeddings are returned unchanged.
std::vector<Vec> fine_tune_embeddings(std::span<const Vec> embeddings,
                                      std::span<const std::optional<double>> labels,
                                      MlpModel& model, const FineTuneHyper& hyper);

Archive to_archive(const MlpModel& model);
MlpModel mlp_from(const Archive& archive);
void save_mlp(const std::string& path, const MlpModel& model);
MlpModel load_mlp(const std::string& path);

}  // namespace mmb

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uck/model.hpp"
#include "uck/tensor.hpp"

namespace uck {

struct TrainConfig {
  double learning_rate = 3e-4;
  double weight_decay = 1e-2;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double cosine_floor = 0.0;
  std::uint64_t seed = 0;
  // LayerNorm affine parameters, biases, and rule embeddings are exempt from
  // weight decay when set.
  bool decay_exempt_non_matrix = true;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
};

// -log softmax(logits)[label], stabilized. Gradient is softmax - onehot.
Tensor cross_entropy(const Tensor& logits, int label);

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm; returns the observed (pre-clip) norm.
double clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm);

// floor + (base - floor) * 0.5 * (1 + cos(pi * step / total)).
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double floor = 0.0);

// One decoupled-weight-decay Adam update with bias correction. decay_mask[i]
// disables decay for parameter i when false.
void adamw_step(const std::vector<Tensor*>& params, const std::vector<std::vector<double>>& grads,
                OptimizerState& opt, double lr, double weight_decay,
                const std::vector<bool>& decay_mask, double beta1, double beta2, double eps);

struct EpochLog {
  std::size_t epoch = 0;     // 1-based
  double mean_loss = 0.0;    // mean over batch means
  double train_acc = 0.0;    // argmax accuracy of the training-mode forwards
  double lr_last = 0.0;      // lr of the epoch's last update
};

struct TrainResult {
  std::vector<EpochLog> log;
};

// Full optimization loop: seeded shuffling, per-batch mean loss, clip, AdamW
// with the cosine schedule, dropout active. Aborts on non-finite loss.
TrainResult train(Model& model, const std::vector<GraphInstance>& data, const TrainConfig& config);

void write_train_log(const std::string& path, const std::vector<EpochLog>& log);
std::vector<EpochLog> read_train_log(const std::string& path);

}  // namespace uck

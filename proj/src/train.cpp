#include "uck/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "uck/errors.hpp"

namespace uck {

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (weight_decay < 0.0) problems.push_back("weight_decay must be >= 0");
  if (epochs < 1) problems.push_back("epochs must be >= 1");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (!(clip_norm > 0.0)) problems.push_back("clip_norm must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0) problems.push_back("beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) problems.push_back("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) problems.push_back("eps must be > 0");
  if (cosine_floor < 0.0) problems.push_back("cosine_floor must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid train config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"learning_rate", learning_rate},
                        {"weight_decay", weight_decay},
                        {"epochs", epochs},
                        {"batch_size", batch_size},
                        {"clip_norm", clip_norm},
                        {"beta1", beta1},
                        {"beta2", beta2},
                        {"eps", eps},
                        {"cosine_floor", cosine_floor},
                        {"seed", seed},
                        {"decay_exempt_non_matrix", decay_exempt_non_matrix}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.cosine_floor = j.value("cosine_floor", c.cosine_floor);
  c.seed = j.value("seed", c.seed);
  c.decay_exempt_non_matrix = j.value("decay_exempt_non_matrix", c.decay_exempt_non_matrix);
  return c;
}

Tensor cross_entropy(const Tensor& logits, int label) {
  if (logits.ndim() != 1 || logits.size() != 2) {
    throw std::invalid_argument("cross_entropy: logits must be a 2-vector");
  }
  if (label != 0 && label != 1) throw std::invalid_argument("cross_entropy: label must be 0 or 1");
  const double z0 = logits.at(0), z1 = logits.at(1);
  const double m = std::max(z0, z1);
  const double log_sum = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
  const double loss = log_sum - logits.at(static_cast<std::size_t>(label));

  const double p0 = std::exp(z0 - log_sum);
  const double p1 = std::exp(z1 - log_sum);
  return make_node(Shape{}, {loss}, {logits},
                   [logits, p0, p1, label](const std::vector<double>& g, GradMap& gm) {
                     auto& gl = gm.buffer(logits.id());
                     gl[0] += g[0] * (p0 - (label == 0 ? 1.0 : 0.0));
                     gl[1] += g[0] * (p1 - (label == 1 ? 1.0 : 0.0));
                   });
}

double clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g) v *= factor;
    }
  }
  return norm;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double floor) {
  if (total_steps == 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
  if (step > total_steps) throw std::invalid_argument("cosine_lr: step exceeds total_steps");
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return floor + (base_lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(const std::vector<Tensor*>& params, const std::vector<std::vector<double>>& grads,
                OptimizerState& opt, double lr, double weight_decay,
                const std::vector<bool>& decay_mask, double beta1, double beta2, double eps) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: grads/params mismatch");
  if (opt.first_moment.empty()) {
    opt.first_moment.resize(params.size());
    opt.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      opt.first_moment[i].assign(params[i]->size(), 0.0);
      opt.second_moment[i].assign(params[i]->size(), 0.0);
    }
  }
  opt.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(opt.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i]->data();
    if (grads[i].size() != theta.size()) throw std::invalid_argument("adamw_step: shape mismatch");
    auto& m = opt.first_moment[i];
    auto& v = opt.second_moment[i];
    const bool decay = weight_decay > 0.0 && (decay_mask.empty() || decay_mask[i]);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = grads[i][j];
      m[j] = beta1 * m[j] + (1.0 - beta1) * g;
      v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      if (decay) theta[j] -= lr * weight_decay * theta[j];  // decoupled, pre-update θ
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

namespace {

// Decay exemptions: LayerNorm affines, biases, and rule embeddings.
bool decays(const std::string& name) {
  if (name.find("ln_gamma") != std::string::npos || name.find("ln_beta") != std::string::npos) {
    return false;
  }
  if (name == "rules.embeddings") return false;
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  return !leaf.starts_with("b");
}

}  // namespace

TrainResult train(Model& model, const std::vector<GraphInstance>& data, const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw ConfigError("train: dataset is empty");

  ParamRefs refs = model.parameters();
  std::vector<Tensor*> params;
  std::vector<bool> decay_mask;
  for (auto& [name, tensor] : refs) {
    params.push_back(tensor);
    decay_mask.push_back(config.decay_exempt_non_matrix ? decays(name) : true);
  }

  OptimizerState opt;
  const std::size_t batches_per_epoch = (data.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * batches_per_epoch;

  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = Rng::derive(config.seed, epoch);
    Rng shuffle_rng(Rng::derive(epoch_seed, 0));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    double lr_last = 0.0;

    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, data.size());
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      std::vector<std::vector<double>> grads(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(params[i]->size(), 0.0);

      double batch_loss = 0.0;
      for (std::size_t pos = begin; pos < end; ++pos) {
        const GraphInstance& inst = data[order[pos]];
        Rng instance_rng(Rng::derive(epoch_seed, 1 + pos));
        ForwardCtx ctx{/*training=*/true, &instance_rng};

        ForwardOutput out = model.forward(inst, ctx);
        Tensor loss = cross_entropy(out.logits, inst.label);
        const double loss_value = loss.value();
        if (!std::isfinite(loss_value)) {
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(b + 1));
        }
        batch_loss += loss_value * inv_batch;
        const bool predicted_pos = out.logits.at(1) > out.logits.at(0);
        if ((inst.label == 1) == predicted_pos) ++correct;

        GradMap gmap = backward(loss);
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (const auto* g = gmap.find(*params[i])) {
            for (std::size_t j = 0; j < g->size(); ++j) grads[i][j] += (*g)[j] * inv_batch;
          }
        }
      }

      clip_grad_norm(grads, config.clip_norm);
      lr_last = cosine_lr(global_step, total_steps, config.learning_rate, config.cosine_floor);
      adamw_step(params, grads, opt, lr_last, config.weight_decay, decay_mask, config.beta1,
                 config.beta2, config.eps);
      ++global_step;
      loss_sum += batch_loss;
    }

    result.log.push_back(EpochLog{epoch + 1, loss_sum / static_cast<double>(batches_per_epoch),
                                  static_cast<double>(correct) / static_cast<double>(data.size()),
                                  lr_last});
  }
  return result;
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& entry : log) {
    nlohmann::json j{{"epoch", entry.epoch},
                     {"mean_loss", entry.mean_loss},
                     {"train_acc", entry.train_acc},
                     {"lr_last", entry.lr_last}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<EpochLog> read_train_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open train log: " + path);
  std::vector<EpochLog> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    log.push_back(EpochLog{j.at("epoch"), j.at("mean_loss"), j.at("train_acc"), j.at("lr_last")});
  }
  return log;
}

}  // namespace uck

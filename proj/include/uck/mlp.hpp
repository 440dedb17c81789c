#pragma once

#include <string>
#include <utility>
#include <vector>

#include "uck/config.hpp"
#include "uck/tensor.hpp"

namespace uck {

// Named views into a module's learnable tensors; ordering is the checkpoint
// and optimizer ordering.
using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

// Plain dense stack: hidden layers with activation + dropout, linear output.
struct Mlp {
  std::vector<Tensor> weights;  // [in×h, h×h, ..., h×out]
  std::vector<Tensor> biases;

  static Mlp init(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers,
                  Rng& rng);

  Tensor forward(const Tensor& x, Activation act, double dropout_rate, const ForwardCtx& ctx) const;

  void collect(const std::string& prefix, ParamRefs& out);
  std::size_t input_dim() const { return weights.front().rows(); }
};

// Weight init used across the model: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_linear_weight(std::size_t in, std::size_t out, Rng& rng);

Tensor apply_activation(const Tensor& x, Activation act);

}  // namespace uck

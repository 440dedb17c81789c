#include "uck/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace uck {

Tensor init_linear_weight(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.uniform(-bound, bound);
  return Tensor::from_data({in, out}, std::move(w), /*requires_grad=*/true);
}

Tensor apply_activation(const Tensor& x, Activation act) {
  return act == Activation::ReLU ? relu(x) : tanh(x);
}

Mlp Mlp::init(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers,
              Rng& rng) {
  Mlp mlp;
  std::size_t prev = in;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    mlp.weights.push_back(init_linear_weight(prev, hidden, rng));
    mlp.biases.push_back(Tensor::zeros({hidden}, /*requires_grad=*/true));
    prev = hidden;
  }
  mlp.weights.push_back(init_linear_weight(prev, out, rng));
  mlp.biases.push_back(Tensor::zeros({out}, /*requires_grad=*/true));
  return mlp;
}

Tensor Mlp::forward(const Tensor& x, Activation act, double dropout_rate,
                    const ForwardCtx& ctx) const {
  if (x.ndim() != 2 || x.cols() != input_dim()) {
    throw std::invalid_argument("mlp: input shape " + shape_str(x.shape()) + " does not match in=" +
                                std::to_string(input_dim()));
  }
  Tensor y = x;
  for (std::size_t l = 0; l + 1 < weights.size(); ++l) {
    y = add_rowvec(matmul(y, weights[l]), biases[l]);
    y = apply_activation(y, act);
    if (ctx.training && dropout_rate > 0.0) y = dropout(y, dropout_rate, *ctx.rng, true);
  }
  return add_rowvec(matmul(y, weights.back()), biases.back());
}

void Mlp::collect(const std::string& prefix, ParamRefs& out) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(prefix + ".w" + std::to_string(l), &weights[l]);
    out.emplace_back(prefix + ".b" + std::to_string(l), &biases[l]);
  }
}

}  // namespace uck

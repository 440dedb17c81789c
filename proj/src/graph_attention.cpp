#include "uck/graph_attention.hpp"

#include <cmath>
#include <stdexcept>

namespace uck {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

AttentionParams AttentionParams::init(std::size_t d_model, Rng& rng) {
  AttentionParams p;
  p.w_query = init_linear_weight(d_model, d_model, rng);
  p.w_key = init_linear_weight(d_model, d_model, rng);
  p.w_value = init_linear_weight(d_model, d_model, rng);
  p.w_out = init_linear_weight(d_model, d_model, rng);
  p.ln_gamma = Tensor::full({d_model}, 1.0, /*requires_grad=*/true);
  p.ln_beta = Tensor::zeros({d_model}, /*requires_grad=*/true);
  return p;
}

void AttentionParams::collect(const std::string& prefix, ParamRefs& out) {
  out.emplace_back(prefix + ".w_query", &w_query);
  out.emplace_back(prefix + ".w_key", &w_key);
  out.emplace_back(prefix + ".w_value", &w_value);
  out.emplace_back(prefix + ".w_out", &w_out);
  out.emplace_back(prefix + ".ln_gamma", &ln_gamma);
  out.emplace_back(prefix + ".ln_beta", &ln_beta);
}

std::vector<std::vector<std::size_t>> attention_masks(const std::vector<std::uint8_t>& adjacency,
                                                      std::size_t n) {
  if (adjacency.size() != n * n) {
    throw std::invalid_argument("attention_masks: adjacency must be " + std::to_string(n) + "x" +
                                std::to_string(n));
  }
  std::vector<std::vector<std::size_t>> masks(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint8_t a = adjacency[i * n + j];
      if (a != 0 && a != 1) {
        throw std::invalid_argument("attention_masks: adjacency entries must be 0 or 1");
      }
      // Self-loop is always attendable so no row projects over an empty set.
      if (a == 1 || i == j) masks[i].push_back(j);
    }
  }
  return masks;
}

Tensor graph_attention_step(const Tensor& h, const std::vector<std::vector<std::size_t>>& masks,
                            const AttentionParams& params, ProjectionKind kind, std::size_t heads) {
  if (h.ndim() != 2) throw std::invalid_argument("graph_attention_step: h must be N×d");
  const std::size_t n = h.rows(), d = h.cols();
  if (masks.size() != n) throw std::invalid_argument("graph_attention_step: one mask per node");
  if (heads < 1 || d % heads != 0) {
    throw std::invalid_argument("graph_attention_step: d_model must be divisible by heads");
  }

  Tensor q = matmul(h, params.w_query);
  Tensor k = matmul(h, params.w_key);
  Tensor v = matmul(h, params.w_value);

  Tensor mixed;
  if (heads == 1) {
    Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
    Tensor weights = masked_rowwise_project(kind, scores, masks);
    mixed = matmul(weights, v);
  } else {
    const std::size_t dh = d / heads;
    std::vector<Tensor> outputs;
    outputs.reserve(heads);
    for (std::size_t head = 0; head < heads; ++head) {
      Tensor qh = cols_slice(q, head * dh, (head + 1) * dh);
      Tensor kh = cols_slice(k, head * dh, (head + 1) * dh);
      Tensor vh = cols_slice(v, head * dh, (head + 1) * dh);
      Tensor scores = scale(matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
      Tensor weights = masked_rowwise_project(kind, scores, masks);
      outputs.push_back(matmul(weights, vh));
    }
    mixed = concat_cols(outputs);
  }

  Tensor out = matmul(mixed, params.w_out);
  return layer_norm(add(h, out), params.ln_gamma, params.ln_beta, kLayerNormEps);
}

Tensor graph_attention_step(const Tensor& h, const std::vector<std::uint8_t>& adjacency,
                            const AttentionParams& params, ProjectionKind kind,
                            std::size_t heads) {
  return graph_attention_step(h, attention_masks(adjacency, h.rows()), params, kind, heads);
}

}  // namespace uck

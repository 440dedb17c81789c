#pragma once

#include <cstdint>
#include <vector>

#include "uck/config.hpp"
#include "uck/mlp.hpp"
#include "uck/tensor.hpp"

namespace uck {

struct AttentionParams {
  Tensor w_query, w_key, w_value, w_out;  // d×d each, no bias
  Tensor ln_gamma, ln_beta;

  static AttentionParams init(std::size_t d_model, Rng& rng);
  void collect(const std::string& prefix, ParamRefs& out);
};

// Row i's attendable set: out-neighbors of i plus i itself. Validates that
// the dense matrix is square with entries in {0, 1}.
std::vector<std::vector<std::size_t>> attention_masks(const std::vector<std::uint8_t>& adjacency,
                                                      std::size_t n);

// One local message-passing sublayer: h' = LayerNorm(h + Wo·Attn(h)), with
// attention weights projected (sparsemax or softmax) over each row's mask.
Tensor graph_attention_step(const Tensor& h, const std::vector<std::vector<std::size_t>>& masks,
                            const AttentionParams& params, ProjectionKind kind, std::size_t heads);

// Convenience overload taking the dense adjacency directly.
Tensor graph_attention_step(const Tensor& h, const std::vector<std::uint8_t>& adjacency,
                            const AttentionParams& params, ProjectionKind kind,
                            std::size_t heads = 1);

}  // namespace uck

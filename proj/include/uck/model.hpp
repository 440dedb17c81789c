#pragma once

#include <string>
#include <vector>

#include "uck/config.hpp"
#include "uck/dsp.hpp"
#include "uck/graph_attention.hpp"
#include "uck/mlp.hpp"
#include "uck/tasks.hpp"
#include "uck/tensor.hpp"

namespace uck {

struct ForwardOutput {
  Tensor logits;  // 2-vector
  DspDiagnostics diagnostics;
  // Endpoint readouts, populated for the endpoint head.
  std::vector<double> h_src, h_tgt;
  double phi_src = 0.0, phi_tgt = 0.0;
};

// T-step rollout interleaving graph attention with DSP updates, plus the two
// classification heads. Parameters are shared across rollout steps.
class Model {
 public:
  Model() = default;
  static Model init(const ModelConfig& config);  // deterministic in config.seed

  const ModelConfig& config() const { return config_; }
  ParamRefs parameters();  // stable, checkpoint-defining order
  std::size_t count_parameters();

  ModelState encode_input(const GraphInstance& instance) const;
  ModelState rollout(ModelState state, const std::vector<std::vector<std::size_t>>& masks,
                     const ForwardCtx& ctx, DspDiagnostics* diagnostics = nullptr) const;
  Tensor classify_endpoint(const ModelState& state, std::size_t src, std::size_t tgt,
                           const ForwardCtx& ctx) const;
  Tensor classify_global(const ModelState& state, const ForwardCtx& ctx) const;

  ForwardOutput forward(const GraphInstance& instance, const ForwardCtx& ctx) const;

 private:
  ModelConfig config_;
  Tensor embed_weight_, embed_bias_;  // in_features -> d_model
  AttentionParams attention_;
  RuleBank rules_;
  Mlp classifier_;
};

}  // namespace uck

#pragma once

#include <cstddef>
#include <vector>

#include "uck/config.hpp"
#include "uck/mlp.hpp"
#include "uck/tensor.hpp"

namespace uck {

// Learnable rule machinery: K rule embeddings plus the projections and MLPs
// that drive activation, selection, effects, and global aggregation.
struct RuleBank {
  Tensor embeddings;  // K×d_rule, N(0, 0.1²) init
  Tensor w_query;     // d_rule×d_model
  Tensor w_key;       // (d_model [+1 with φ in keys])×d_model
  Mlp mlp_alpha;      // [h̄, φ̄, E_k] -> 1 logit per rule
  Mlp mlp_h;          // [h_i, (φ_i), E_k, t/T] -> Δh
  Mlp mlp_phi;        // [h_i, (φ_i), E_k, t/T] -> Δφ
  Mlp mlp_global;     // [h̄, φ̄, E_k] -> ΔΦ logit per rule
  Tensor ln_gamma, ln_beta;  // LayerNorm of the gated h update

  static RuleBank init(const ModelConfig& config, Rng& rng);
  void collect(const std::string& prefix, ParamRefs& out);
};

// Mutable per-rollout-step state. phi stays in [-phi_max, phi_max]; the
// global signal moves by at most 1 per step.
struct ModelState {
  Tensor h;           // N×d_model
  Tensor phi;         // N
  Tensor phi_global;  // scalar Φ
  std::size_t t = 0;

  std::size_t num_nodes() const { return h.rows(); }
};

// Per-step traces for analysis and reporting; plain values, no tape.
struct DspDiagnostics {
  std::vector<std::vector<double>> alpha;              // step -> K
  std::vector<std::vector<double>> beta;               // step -> K×N row-major
  std::vector<std::vector<double>> global_contrib;     // step -> K (α_k·ΔΦ_k)
  std::vector<double> phi_global_trace;                // T+1, starts at 0
  std::vector<double> final_phi;                       // N
  double final_phi_sum = 0.0;
  double final_phi_global = 0.0;
};

struct EffectTensors {
  Tensor delta_h;    // (K·N)×d_model, rule k occupies rows [k·N, (k+1)·N)
  Tensor delta_phi;  // (K·N)×1
};

Tensor rule_activation(const ModelState& state, const RuleBank& bank, const ModelConfig& config,
                       const ForwardCtx& ctx);
Tensor node_selection(const ModelState& state, const RuleBank& bank, const ModelConfig& config,
                      const ForwardCtx& ctx);
EffectTensors effect_computation(const ModelState& state, const RuleBank& bank,
                                 const ModelConfig& config, const ForwardCtx& ctx);
ModelState gated_update(const ModelState& state, const Tensor& alpha, const Tensor& beta,
                        const EffectTensors& effects, double phi_max, const RuleBank& bank);
ModelState global_phi_update(const ModelState& state, const Tensor& alpha, const RuleBank& bank,
                             const ModelConfig& config, const ForwardCtx& ctx,
                             std::vector<double>* contrib_out = nullptr);

// One full DSP update honoring the ablation flags; t is advanced by the
// caller. Appends the step's traces when diagnostics is non-null.
ModelState dsp_step(const ModelState& state, const RuleBank& bank, const ModelConfig& config,
                    const ForwardCtx& ctx, DspDiagnostics* diagnostics = nullptr);

}  // namespace uck

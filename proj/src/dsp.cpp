#include "uck/dsp.hpp"

#include <cmath>
#include <stdexcept>

namespace uck {

namespace {
constexpr double kLayerNormEps = 1e-5;

// [h̄, φ̄, E_k] rows, one per rule. The φ̄ slot is kept and fed zero when the
// channel is disabled, so summary MLP shapes do not depend on ablations.
Tensor rule_summary_input(const ModelState& state, const RuleBank& bank, const ModelConfig& config) {
  const std::size_t k = config.num_rules;
  Tensor h_bar = mean_axis(state.h, 0);
  Tensor phi_bar = config.use_phi ? mean_all(state.phi) : Tensor::scalar(0.0);
  return concat_cols({broadcast_row(h_bar, k), broadcast_scalar_col(phi_bar, k), bank.embeddings});
}

}  // namespace

RuleBank RuleBank::init(const ModelConfig& config, Rng& rng) {
  RuleBank bank;
  const std::size_t d = config.d_model, dr = config.d_rule, k = config.num_rules;

  std::vector<double> e(k * dr);
  for (auto& v : e) v = rng.normal(0.0, 0.1);
  bank.embeddings = Tensor::from_data({k, dr}, std::move(e), /*requires_grad=*/true);

  bank.w_query = init_linear_weight(dr, d, rng);
  bank.w_key = init_linear_weight(d + (config.phi_in_keys ? 1 : 0), d, rng);

  const std::size_t summary_in = d + 1 + dr;
  const std::size_t effect_in = d + (config.phi_in_effects ? 1 : 0) + dr + 1;
  bank.mlp_alpha = Mlp::init(summary_in, d, 1, 2, rng);
  bank.mlp_h = Mlp::init(effect_in, d, d, 2, rng);
  bank.mlp_phi = Mlp::init(effect_in, d, 1, 2, rng);
  bank.mlp_global = Mlp::init(summary_in, d, 1, 2, rng);

  bank.ln_gamma = Tensor::full({d}, 1.0, /*requires_grad=*/true);
  bank.ln_beta = Tensor::zeros({d}, /*requires_grad=*/true);
  return bank;
}

void RuleBank::collect(const std::string& prefix, ParamRefs& out) {
  out.emplace_back(prefix + ".embeddings", &embeddings);
  out.emplace_back(prefix + ".w_query", &w_query);
  out.emplace_back(prefix + ".w_key", &w_key);
  mlp_alpha.collect(prefix + ".mlp_alpha", out);
  mlp_h.collect(prefix + ".mlp_h", out);
  mlp_phi.collect(prefix + ".mlp_phi", out);
  mlp_global.collect(prefix + ".mlp_global", out);
  out.emplace_back(prefix + ".ln_gamma", &ln_gamma);
  out.emplace_back(prefix + ".ln_beta", &ln_beta);
}

Tensor rule_activation(const ModelState& state, const RuleBank& bank, const ModelConfig& config,
                       const ForwardCtx& ctx) {
  Tensor logits = bank.mlp_alpha.forward(rule_summary_input(state, bank, config),
                                         config.activation, config.dropout, ctx);
  return project(config.attention, reshape(logits, {config.num_rules}));
}

Tensor node_selection(const ModelState& state, const RuleBank& bank, const ModelConfig& config,
                      const ForwardCtx& ctx) {
  (void)ctx;
  const std::size_t n = state.num_nodes();
  Tensor queries = matmul(bank.embeddings, bank.w_query);  // K×d
  Tensor key_in = config.phi_in_keys ? concat_cols({state.h, reshape(state.phi, {n, 1})}) : state.h;
  Tensor keys = matmul(key_in, bank.w_key);  // N×d
  Tensor scores = scale(matmul_nt(queries, keys), 1.0 / std::sqrt(static_cast<double>(config.d_model)));
  return rowwise_project(config.attention, scores);
}

EffectTensors effect_computation(const ModelState& state, const RuleBank& bank,
                                 const ModelConfig& config, const ForwardCtx& ctx) {
  const std::size_t n = state.num_nodes();
  const std::size_t k = config.num_rules;
  const double t_enc = static_cast<double>(state.t) / static_cast<double>(config.rollout_steps);
  Tensor t_col = Tensor::full({n, 1}, t_enc);

  std::vector<Tensor> blocks;
  blocks.reserve(k);
  Tensor phi_col = config.phi_in_effects ? reshape(state.phi, {n, 1}) : Tensor();
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<Tensor> parts;
    parts.push_back(state.h);
    if (config.phi_in_effects) parts.push_back(phi_col);
    parts.push_back(broadcast_row(row(bank.embeddings, r), n));
    parts.push_back(t_col);
    blocks.push_back(concat_cols(parts));
  }
  Tensor x = concat_rows(blocks);  // (K·N)×effect_in

  EffectTensors out;
  out.delta_h = bank.mlp_h.forward(x, config.activation, config.dropout, ctx);
  // With the φ channel ablated the feasibility effects are identically zero
  // and never evaluated.
  out.delta_phi = config.use_phi
                      ? bank.mlp_phi.forward(x, config.activation, config.dropout, ctx)
                      : Tensor::zeros({k * n, 1});
  return out;
}

ModelState gated_update(const ModelState& state, const Tensor& alpha, const Tensor& beta,
                        const EffectTensors& effects, double phi_max, const RuleBank& bank) {
  const std::size_t n = state.num_nodes();
  const std::size_t k = alpha.size();
  if (beta.ndim() != 2 || beta.rows() != k || beta.cols() != n) {
    throw std::invalid_argument("gated_update: beta must be K×N");
  }

  Tensor gate = mul_rowwise(beta, alpha);             // K×N, gate_{k,i} = α_k β_{k,i}
  Tensor gate_flat = reshape(gate, {k * n});

  Tensor weighted_dh = mul_rowwise(effects.delta_h, gate_flat);
  Tensor h_delta = sum_row_blocks(weighted_dh, k);
  Tensor h_next = layer_norm(add(state.h, h_delta), bank.ln_gamma, bank.ln_beta, kLayerNormEps);

  Tensor dphi = reshape(effects.delta_phi, {k, n});
  Tensor phi_delta = sum_axis(mul(gate, dphi), 0);
  Tensor phi_next = clamp(add(state.phi, phi_delta), -phi_max, phi_max);

  return ModelState{h_next, phi_next, state.phi_global, state.t};
}

ModelState global_phi_update(const ModelState& state, const Tensor& alpha, const RuleBank& bank,
                             const ModelConfig& config, const ForwardCtx& ctx,
                             std::vector<double>* contrib_out) {
  Tensor raw = bank.mlp_global.forward(rule_summary_input(state, bank, config), config.activation,
                                       config.dropout, ctx);
  Tensor bounded = tanh(reshape(raw, {config.num_rules}));  // ΔΦ_k ∈ (-1, 1)
  Tensor contribs = mul(alpha, bounded);
  if (contrib_out) *contrib_out = contribs.data();
  // α on the simplex and |ΔΦ_k| ≤ 1 bound the aggregate by 1 in exact
  // arithmetic; the clamp only trims rounding dust so |Φ| ≤ t holds exactly.
  Tensor phi_global_next = add(state.phi_global, clamp(sum_all(contribs), -1.0, 1.0));
  return ModelState{state.h, state.phi, phi_global_next, state.t};
}

ModelState dsp_step(const ModelState& state, const RuleBank& bank, const ModelConfig& config,
                    const ForwardCtx& ctx, DspDiagnostics* diagnostics) {
  Tensor alpha = rule_activation(state, bank, config, ctx);
  Tensor beta = node_selection(state, bank, config, ctx);
  EffectTensors effects = effect_computation(state, bank, config, ctx);

  ModelState next = gated_update(state, alpha, beta, effects, config.phi_max, bank);
  if (!config.use_phi) next.phi = state.phi;  // channel frozen at zero

  std::vector<double> contribs(config.num_rules, 0.0);
  if (config.use_global_phi) {
    next = global_phi_update(next, alpha, bank, config, ctx, &contribs);
  }

  if (diagnostics) {
    diagnostics->alpha.push_back(alpha.data());
    diagnostics->beta.push_back(beta.data());
    diagnostics->global_contrib.push_back(std::move(contribs));
  }
  return next;
}

}  // namespace uck

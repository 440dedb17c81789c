#include "uck/model.hpp"

#include <stdexcept>

#include "uck/errors.hpp"

namespace uck {

Model Model::init(const ModelConfig& config) {
  config.validate();
  Model model;
  model.config_ = config;
  Rng rng(config.seed);

  model.embed_weight_ = init_linear_weight(config.in_features, config.d_model, rng);
  model.embed_bias_ = Tensor::zeros({config.d_model}, /*requires_grad=*/true);
  model.attention_ = AttentionParams::init(config.d_model, rng);
  model.rules_ = RuleBank::init(config, rng);

  // Endpoint head reads [h_src, h_tgt, φ_src, φ_tgt, Φ]; global head reads
  // [mean(h), mean(φ), Φ]. Disabled channels are fed as zeros, so the input
  // width is ablation-independent.
  const std::size_t cls_in = config.head == HeadKind::Endpoint ? 2 * config.d_model + 3
                                                               : config.d_model + 2;
  model.classifier_ = Mlp::init(cls_in, config.d_model, 2, 2, rng);
  return model;
}

ParamRefs Model::parameters() {
  ParamRefs refs;
  refs.emplace_back("embed.weight", &embed_weight_);
  refs.emplace_back("embed.bias", &embed_bias_);
  attention_.collect("attention", refs);
  rules_.collect("rules", refs);
  classifier_.collect("classifier", refs);
  return refs;
}

std::size_t Model::count_parameters() {
  std::size_t total = 0;
  for (const auto& [name, tensor] : parameters()) total += tensor->size();
  return total;
}

ModelState Model::encode_input(const GraphInstance& instance) const {
  instance.validate();
  const std::size_t width = feature_width(instance.task);
  if (width != config_.in_features) {
    throw ConfigError("encode_input: task feature width " + std::to_string(width) +
                      " does not match configured in_features " + std::to_string(config_.in_features));
  }
  Tensor features = Tensor::from_data({instance.n_nodes, width}, instance.feature_matrix());
  ModelState state;
  state.h = add_rowvec(matmul(features, embed_weight_), embed_bias_);
  state.phi = Tensor::zeros({instance.n_nodes});
  state.phi_global = Tensor::scalar(0.0);
  state.t = 0;
  return state;
}

ModelState Model::rollout(ModelState state, const std::vector<std::vector<std::size_t>>& masks,
                          const ForwardCtx& ctx, DspDiagnostics* diagnostics) const {
  if (diagnostics) diagnostics->phi_global_trace.push_back(state.phi_global.value());
  for (std::size_t step = 0; step < config_.rollout_steps; ++step) {
    state.h = graph_attention_step(state.h, masks, attention_, config_.attention, config_.heads);
    if (config_.use_dsp) {
      state = dsp_step(state, rules_, config_, ctx, diagnostics);
    }
    state.t = step + 1;
    if (diagnostics) diagnostics->phi_global_trace.push_back(state.phi_global.value());
  }
  if (diagnostics) {
    diagnostics->final_phi = state.phi.data();
    diagnostics->final_phi_sum = 0.0;
    for (double v : diagnostics->final_phi) diagnostics->final_phi_sum += v;
    diagnostics->final_phi_global = state.phi_global.value();
  }
  return state;
}

namespace {

Tensor scalar_slot(const Tensor& value, bool enabled) {
  return enabled ? reshape(value, {1}) : Tensor::zeros({1});
}

}  // namespace

Tensor Model::classify_endpoint(const ModelState& state, std::size_t src, std::size_t tgt,
                                const ForwardCtx& ctx) const {
  if (src >= state.num_nodes() || tgt >= state.num_nodes()) {
    throw std::out_of_range("classify_endpoint: src/tgt out of range");
  }
  std::vector<Tensor> parts;
  parts.push_back(row(state.h, src));
  parts.push_back(row(state.h, tgt));
  parts.push_back(config_.use_phi ? reshape(element(state.phi, src), {1}) : Tensor::zeros({1}));
  parts.push_back(config_.use_phi ? reshape(element(state.phi, tgt), {1}) : Tensor::zeros({1}));
  parts.push_back(scalar_slot(state.phi_global, config_.use_global_phi));
  Tensor x = reshape(concat(parts), {1, 2 * config_.d_model + 3});
  return reshape(classifier_.forward(x, config_.activation, config_.dropout, ctx), {2});
}

Tensor Model::classify_global(const ModelState& state, const ForwardCtx& ctx) const {
  std::vector<Tensor> parts;
  parts.push_back(mean_axis(state.h, 0));
  parts.push_back(config_.use_phi ? reshape(mean_all(state.phi), {1}) : Tensor::zeros({1}));
  parts.push_back(scalar_slot(state.phi_global, config_.use_global_phi));
  Tensor x = reshape(concat(parts), {1, config_.d_model + 2});
  return reshape(classifier_.forward(x, config_.activation, config_.dropout, ctx), {2});
}

ForwardOutput Model::forward(const GraphInstance& instance, const ForwardCtx& ctx) const {
  if (config_.head == HeadKind::Endpoint && (!instance.src || !instance.tgt)) {
    throw ConfigError("forward: endpoint head requires src/tgt designations (task " +
                      uck::to_string(instance.task) + " has none)");
  }
  ForwardOutput out;
  ModelState state = encode_input(instance);
  const auto masks = attention_masks(instance.dense_adjacency(), instance.n_nodes);
  state = rollout(std::move(state), masks, ctx, &out.diagnostics);

  if (config_.head == HeadKind::Endpoint) {
    out.logits = classify_endpoint(state, *instance.src, *instance.tgt, ctx);
    out.h_src = row(state.h, *instance.src).data();
    out.h_tgt = row(state.h, *instance.tgt).data();
    out.phi_src = state.phi.at(*instance.src);
    out.phi_tgt = state.phi.at(*instance.tgt);
  } else {
    out.logits = classify_global(state, ctx);
  }
  return out;
}

}  // namespace uck

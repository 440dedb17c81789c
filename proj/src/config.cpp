#include "uck/config.hpp"

#include <vector>

#include "uck/errors.hpp"

namespace uck {

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }
std::string to_string(HeadKind h) { return h == HeadKind::Endpoint ? "endpoint" : "global"; }

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::Full: return "full";
    case AblationMode::NoPhi: return "no-phi";
    case AblationMode::NoGlobalPhi: return "no-global-phi";
    case AblationMode::PhiInKeysOnly: return "phi-keys-only";
    case AblationMode::PhiInEffectsOnly: return "phi-effects-only";
    case AblationMode::NoDsp: return "no-dsp";
  }
  return "full";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation: " + name);
}

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "endpoint") return HeadKind::Endpoint;
  if (name == "global") return HeadKind::Global;
  throw ConfigError("unknown head kind: " + name);
}

AblationMode ablation_from_string(const std::string& name) {
  if (name == "full") return AblationMode::Full;
  if (name == "no-phi") return AblationMode::NoPhi;
  if (name == "no-global-phi") return AblationMode::NoGlobalPhi;
  if (name == "phi-keys-only") return AblationMode::PhiInKeysOnly;
  if (name == "phi-effects-only") return AblationMode::PhiInEffectsOnly;
  if (name == "no-dsp") return AblationMode::NoDsp;
  throw ConfigError("unknown ablation mode: " + name);
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (d_model < 1) problems.push_back("d_model must be >= 1");
  if (d_rule < 1) problems.push_back("d_rule must be >= 1");
  if (num_rules < 1) problems.push_back("num_rules must be >= 1");
  if (rollout_steps < 1) problems.push_back("rollout_steps must be >= 1");
  if (!(phi_max > 0.0)) problems.push_back("phi_max must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) problems.push_back("dropout must be in [0, 1)");
  if (heads < 1) problems.push_back("heads must be >= 1");
  if (heads >= 1 && d_model % heads != 0) problems.push_back("d_model must be divisible by heads");
  if (in_features < 1) problems.push_back("in_features must be >= 1");
  if (!use_phi && (phi_in_keys || phi_in_effects)) {
    problems.push_back("phi_in_keys/phi_in_effects require use_phi");
  }
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{{"d_model", d_model},
                        {"d_rule", d_rule},
                        {"num_rules", num_rules},
                        {"rollout_steps", rollout_steps},
                        {"phi_max", phi_max},
                        {"dropout", dropout},
                        {"attention", to_string(attention)},
                        {"heads", heads},
                        {"use_dsp", use_dsp},
                        {"use_phi", use_phi},
                        {"use_global_phi", use_global_phi},
                        {"phi_in_keys", phi_in_keys},
                        {"phi_in_effects", phi_in_effects},
                        {"head", to_string(head)},
                        {"activation", to_string(activation)},
                        {"in_features", in_features},
                        {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.d_rule = j.value("d_rule", c.d_rule);
  c.num_rules = j.value("num_rules", c.num_rules);
  c.rollout_steps = j.value("rollout_steps", c.rollout_steps);
  c.phi_max = j.value("phi_max", c.phi_max);
  c.dropout = j.value("dropout", c.dropout);
  if (j.contains("attention")) c.attention = projection_kind_from_string(j.at("attention"));
  c.heads = j.value("heads", c.heads);
  c.use_dsp = j.value("use_dsp", c.use_dsp);
  c.use_phi = j.value("use_phi", c.use_phi);
  c.use_global_phi = j.value("use_global_phi", c.use_global_phi);
  c.phi_in_keys = j.value("phi_in_keys", c.phi_in_keys);
  c.phi_in_effects = j.value("phi_in_effects", c.phi_in_effects);
  if (j.contains("head")) c.head = head_kind_from_string(j.at("head"));
  if (j.contains("activation")) c.activation = activation_from_string(j.at("activation"));
  c.in_features = j.value("in_features", c.in_features);
  c.seed = j.value("seed", c.seed);
  return c;
}

void apply_ablation(ModelConfig& config, AblationMode mode) {
  switch (mode) {
    case AblationMode::Full:
      break;
    case AblationMode::NoPhi:
      config.use_phi = false;
      config.phi_in_keys = false;
      config.phi_in_effects = false;
      break;
    case AblationMode::NoGlobalPhi:
      config.use_global_phi = false;
      break;
    case AblationMode::PhiInKeysOnly:
      config.phi_in_effects = false;
      break;
    case AblationMode::PhiInEffectsOnly:
      config.phi_in_keys = false;
      break;
    case AblationMode::NoDsp:
      config.use_dsp = false;
      break;
  }
}

}  // namespace uck

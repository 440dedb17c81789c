#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "uck/rng.hpp"
#include "uck/sparse_projection.hpp"

namespace uck {

enum class Activation { ReLU, Tanh };
enum class HeadKind { Endpoint, Global };
enum class AblationMode { Full, NoPhi, NoGlobalPhi, PhiInKeysOnly, PhiInEffectsOnly, NoDsp };

std::string to_string(Activation a);
std::string to_string(HeadKind h);
std::string to_string(AblationMode m);
Activation activation_from_string(const std::string& name);
HeadKind head_kind_from_string(const std::string& name);
AblationMode ablation_from_string(const std::string& name);

// Architecture plus ablation switches. Defaults are the values used across
// all experiments; ablations flip exactly the named flags.
struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t d_rule = 64;
  std::size_t num_rules = 12;      // K
  std::size_t rollout_steps = 4;   // T
  double phi_max = 6.0;
  double dropout = 0.1;
  ProjectionKind attention = ProjectionKind::Sparsemax;
  std::size_t heads = 1;
  bool use_dsp = true;
  bool use_phi = true;
  bool use_global_phi = true;
  bool phi_in_keys = true;
  bool phi_in_effects = true;
  HeadKind head = HeadKind::Endpoint;
  Activation activation = Activation::ReLU;
  std::size_t in_features = 3;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError listing every violation
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

void apply_ablation(ModelConfig& config, AblationMode mode);

// Per-forward context: dropout is active only when training, and draws from
// the supplied stream.
struct ForwardCtx {
  bool training = false;
  Rng* rng = nullptr;
};

}  // namespace uck

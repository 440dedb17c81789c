#pragma once

#include <string>

#include "uck/model.hpp"

namespace uck {

// Binary checkpoint: format-name + version header, config snapshot, then
// named parameter entries (name, shape, row-major 64-bit little-endian
// values). Round-trips bit-exactly.
void save_checkpoint(const std::string& path, Model& model);
Model load_checkpoint(const std::string& path);

// Reads only the config snapshot (for compatibility checks).
ModelConfig read_checkpoint_config(const std::string& path);

extern const char* kCheckpointFormatName;
extern const int kCheckpointFormatVersion;

}  // namespace uck

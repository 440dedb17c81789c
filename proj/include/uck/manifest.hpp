#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace uck {

extern const char* kToolVersion;
extern const int kManifestFormatVersion;

// Written before a command starts working; holds everything needed to
// reproduce the run byte-for-byte.
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  nlohmann::json config;  // fully resolved command options
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  nlohmann::json format_versions;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

}  // namespace uck

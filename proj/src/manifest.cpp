#include "uck/manifest.hpp"

#include <fstream>

#include "uck/checkpoint.hpp"
#include "uck/errors.hpp"
#include "uck/tasks.hpp"

namespace uck {

const char* kToolVersion = "uck 1.0.0";
const int kManifestFormatVersion = 1;

nlohmann::json RunManifest::to_json() const {
  return nlohmann::json{{"format", "uck-manifest"},
                        {"version", kManifestFormatVersion},
                        {"command", command},
                        {"tool_version", tool_version},
                        {"config", config},
                        {"seeds", seeds},
                        {"inputs", inputs},
                        {"outputs", outputs},
                        {"format_versions", format_versions}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "uck-manifest") throw IoError("not a uck manifest");
  if (j.value("version", -1) != kManifestFormatVersion) throw IoError("unsupported manifest version");
  RunManifest m;
  m.command = j.at("command");
  m.tool_version = j.at("tool_version");
  m.config = j.at("config");
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.inputs = j.at("inputs").get<std::vector<std::string>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.format_versions = j.at("format_versions");
  return m;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << manifest.to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest is not valid json: " + path + " (" + e.what() + ")");
  }
  return RunManifest::from_json(j);
}

}  // namespace uck

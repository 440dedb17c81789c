#include "uck/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "uck/errors.hpp"

namespace uck {

const char* kCheckpointFormatName = "uck-checkpoint";
const int kCheckpointFormatVersion = 1;

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw IoError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw IoError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::string read_str(std::istream& in, std::size_t max_len = 1 << 20) {
  const std::uint64_t len = read_u64(in);
  if (len > max_len) throw IoError("checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  write_str(out, kCheckpointFormatName);
  write_u32(out, kCheckpointFormatVersion);
  write_str(out, model.config().to_json().dump());

  ParamRefs params = model.parameters();
  write_u64(out, params.size());
  for (const auto& [name, tensor] : params) {
    write_str(out, name);
    write_u32(out, static_cast<std::uint32_t>(tensor->ndim()));
    for (std::size_t dim : tensor->shape()) write_u64(out, dim);
    for (double v : tensor->data()) write_f64(out, v);
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace {

ModelConfig read_header(std::istream& in, const std::string& path) {
  std::string magic;
  try {
    magic = read_str(in, 64);
  } catch (const IoError&) {
    throw IoError("not a " + std::string(kCheckpointFormatName) + " file: " + path);
  }
  if (magic != kCheckpointFormatName) {
    throw IoError("not a " + std::string(kCheckpointFormatName) + " file: " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != static_cast<std::uint32_t>(kCheckpointFormatVersion)) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  try {
    return ModelConfig::from_json(nlohmann::json::parse(read_str(in)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint config is corrupt: " + path + " (" + e.what() + ")");
  }
}

}  // namespace

ModelConfig read_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  return read_header(in, path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  Model model = Model::init(read_header(in, path));
  ParamRefs params = model.parameters();
  const std::uint64_t count = read_u64(in);
  if (count != params.size()) {
    throw IoError("checkpoint parameter count mismatch in " + path);
  }
  for (auto& [name, tensor] : params) {
    const std::string stored_name = read_str(in);
    if (stored_name != name) {
      throw IoError("checkpoint parameter order mismatch: expected " + name + ", found " +
                    stored_name);
    }
    const std::uint32_t ndim = read_u32(in);
    Shape shape(ndim);
    for (auto& dim : shape) dim = read_u64(in);
    if (shape != tensor->shape()) {
      throw IoError("checkpoint shape mismatch for " + name);
    }
    for (double& v : tensor->data()) v = read_f64(in);
  }
  return model;
}

}  // namespace uck

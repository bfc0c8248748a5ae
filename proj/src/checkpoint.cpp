#include "probs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace probs {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian host");
static_assert(sizeof(float) == 4);

constexpr std::size_t kLengthBytes = 8;

}  // namespace

CheckpointError::CheckpointError(const std::string& what, std::uint64_t offset)
    : std::runtime_error("checkpoint: " + what + " at byte offset " + std::to_string(offset)),
      offset_(offset) {}

const Checkpoint::Block& Checkpoint::block(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw CheckpointError("missing block '" + std::string(name) + "'", 0);
}

bool Checkpoint::has_block(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return true;
  }
  return false;
}

void Checkpoint::add_network(std::string name, const nn::ParameterSet& p) {
  blocks.push_back(Block{std::move(name), p.weights, layers_to_json(p.layers)});
}

void Checkpoint::add_floats(std::string name, std::vector<float> data) {
  blocks.push_back(Block{std::move(name), std::move(data), nullptr});
}

nn::ParameterSet Checkpoint::network(std::string_view name) const {
  const Block& b = block(name);
  if (b.layers.is_null()) throw CheckpointError("block '" + b.name + "' has no layer specs", 0);
  nn::ParameterSet p;
  p.layers = layers_from_json(b.layers);
  p.weights = b.data;
  p.grads.assign(p.weights.size(), 0.0F);
  try {
    p.validate();
  } catch (const nn::ConfigError& e) {
    throw CheckpointError("block '" + b.name + "': " + e.what(), 0);
  }
  return p;
}

nlohmann::json layers_to_json(const std::vector<nn::LayerSpec>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json j;
    j["kind"] = nn::layer_kind_name(l.kind);
    j["in"] = l.in_features;
    j["out"] = l.out_features;
    if (l.kind == nn::LayerKind::kConv2d) {
      j["height"] = l.height;
      j["width"] = l.width;
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel"] = l.kernel;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<nn::LayerSpec> layers_from_json(const nlohmann::json& j) {
  std::vector<nn::LayerSpec> out;
  for (const auto& e : j) {
    const auto kind = nn::parse_layer_kind(e.at("kind").get<std::string>());
    switch (kind) {
      case nn::LayerKind::kConv2d:
        out.push_back(nn::LayerSpec::conv2d(e.at("height"), e.at("width"), e.at("in_channels"),
                                            e.at("out_channels"), e.at("kernel")));
        break;
      case nn::LayerKind::kDense:
        out.push_back(nn::LayerSpec::dense(e.at("in"), e.at("out")));
        break;
      case nn::LayerKind::kLeakyRelu:
        out.push_back(nn::LayerSpec::leaky_relu(e.at("in")));
        break;
      case nn::LayerKind::kTanh:
        out.push_back(nn::LayerSpec::tanh(e.at("in")));
        break;
    }
  }
  return out;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  header["blocks"] = nlohmann::json::array();
  std::size_t floats = 0;
  for (const auto& b : c.blocks) {
    nlohmann::json e;
    e["name"] = b.name;
    e["count"] = b.data.size();
    if (!b.layers.is_null()) e["layers"] = b.layers;
    header["blocks"].push_back(std::move(e));
    floats += b.data.size();
  }
  const std::string text = header.dump();
  std::string out;
  out.reserve(kCheckpointMagic.size() + kLengthBytes + text.size() + floats * sizeof(float));
  out.append(kCheckpointMagic);
  const std::uint64_t len = text.size();
  char len_bytes[kLengthBytes];
  std::memcpy(len_bytes, &len, kLengthBytes);
  out.append(len_bytes, kLengthBytes);
  out.append(text);
  for (const auto& b : c.blocks) {
    out.append(reinterpret_cast<const char*>(b.data.data()), b.data.size() * sizeof(float));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError("bad magic (expected PROBS1)", 0);
  }
  std::size_t pos = kCheckpointMagic.size();
  if (bytes.size() < pos + kLengthBytes) throw CheckpointError("truncated header length", pos);
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + pos, kLengthBytes);
  pos += kLengthBytes;
  if (len > bytes.size() - pos) {
    throw CheckpointError("header length " + std::to_string(len) + " exceeds file size", pos - kLengthBytes);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed JSON header: ") + e.what(), pos);
  }
  pos += len;

  Checkpoint c;
  try {
    c.meta = header.at("meta");
    for (const auto& e : header.at("blocks")) {
      Checkpoint::Block b;
      b.name = e.at("name").get<std::string>();
      const auto count = e.at("count").get<std::uint64_t>();
      if (e.contains("layers")) b.layers = e.at("layers");
      if (count > (bytes.size() - pos) / sizeof(float)) {
        throw CheckpointError("block '" + b.name + "' truncated: needs " +
                                  std::to_string(count * sizeof(float)) + " bytes, " +
                                  std::to_string(bytes.size() - pos) + " remain",
                              pos);
      }
      b.data.resize(count);
      std::memcpy(b.data.data(), bytes.data() + pos, count * sizeof(float));
      pos += count * sizeof(float);
      c.blocks.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("invalid header fields: ") + e.what(), kCheckpointMagic.size() + kLengthBytes);
  }
  if (pos != bytes.size()) {
    throw CheckpointError(std::to_string(bytes.size() - pos) + " trailing bytes", pos);
  }
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::string bytes = serialize_checkpoint(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + tmp.string() + "' for writing", 0);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for '" + tmp.string() + "'", 0);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace probs

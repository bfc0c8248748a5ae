#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "probs/nn.hpp"

namespace probs {

/// Raised for unreadable or malformed checkpoint data; `offset` is the byte
/// position where parsing failed.
class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

inline constexpr std::string_view kCheckpointMagic = "PROBS1";

/// File layout:
///   6 bytes   "PROBS1"
///   8 bytes   little-endian u64 header length N
///   N bytes   JSON header {"meta": ..., "blocks": [{"name", "count", "layers"?}, ...]}
///   then each block's floats, little-endian IEEE-754 binary32, in header order.
struct Checkpoint {
  struct Block {
    std::string name;
    std::vector<float> data;
    nlohmann::json layers;  // null unless the block holds network weights
  };

  nlohmann::json meta = nlohmann::json::object();
  std::vector<Block> blocks;

  const Block& block(std::string_view name) const;
  bool has_block(std::string_view name) const;
  void add_network(std::string name, const nn::ParameterSet& p);
  void add_floats(std::string name, std::vector<float> data);
  nn::ParameterSet network(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes atomically (temp file + rename).
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json layers_to_json(const std::vector<nn::LayerSpec>& layers);
std::vector<nn::LayerSpec> layers_from_json(const nlohmann::json& j);

}  // namespace probs

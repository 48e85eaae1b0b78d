#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "storygen/model.hpp"

namespace storygen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint that cannot be read or does not match the expected config.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string config_to_text(const ModelConfig& config);
ModelConfig config_from_text(const std::string& text);

/// Binary layout: magic "SGCKPT", u32 version, u32-prefixed config text,
/// u32 tensor count, then per tensor a u32-prefixed name, u32 rank, u64
/// dims and the raw little-endian doubles.
void save_checkpoint(std::ostream& out, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

/// FNV-1a of the serialized checkpoint bytes.
std::uint64_t checkpoint_hash(const ModelParams& params);

}  // namespace storygen

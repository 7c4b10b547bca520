#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "drunet/model.hpp"

namespace drunet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'R', 'U', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary: magic, version, trainable parameter count, model
/// config, then one (name, shape, float32 data) record per parameter tensor
/// followed by running mean/var records for every batch norm. Byte layout is
/// in docs/checkpoint_format.md.
std::string encode_checkpoint(const Drunet<float>& model);
Drunet<float> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Drunet<float>& model, const std::filesystem::path& path);
Drunet<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace drunet

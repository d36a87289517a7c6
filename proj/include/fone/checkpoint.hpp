#pragma once

// Checkpoint container. Byte layout, all integers little-endian:
//
//   offset  size  field
//   0       8     magic "FONECKPT"
//   8       4     u32 format version (kCheckpointVersion)
//   12      8     u64 seed
//   20      8     u64 training step (optimizer updates)
//   28      ...   str model config   (key=value lines)
//           ...   str vocabulary     (one token per line)
//           ...   str run metadata   (JSON object, may be "{}")
//           8     u64 P = parameter count
//           4P    f32 weights, tensor table order
//           8     u64 M = optimizer moment count (0 or P)
//           8M    f64 first moments
//           8M    f64 second moments
//           8     u64 FNV-1a 64 of every preceding byte
//
// where str = u64 byte length followed by the bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fone/model.hpp"
#include "fone/tokenize.hpp"

namespace fone {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Model model{ModelConfig{}};
    Adam optimizer;
    Vocabulary vocabulary;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::string metadata = "{}";
};

std::string model_config_to_text(const ModelConfig& config);
/// Throws config-error on unknown or malformed keys.
ModelConfig model_config_from_text(std::string_view text);

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws parse-error for a bad magic, truncated data or checksum mismatch,
/// and state-error for a different format version.
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Throws io-error when the file cannot be written or read.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fone

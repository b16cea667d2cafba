#pragma once

#include "madtwinnet/masker.hpp"
#include "madtwinnet/parameters.hpp"
#include "madtwinnet/signal.hpp"
#include "madtwinnet/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace madt {

// File layout (little-endian):
//   "MADT" | u32 version (1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 ndim | u64 dims[ndim] | f32 payload (row-major)
//   u32 CRC-32 of every byte between the header and the checksum
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;
};

void write_tensor_file(const std::filesystem::path& path, const std::vector<TensorRecord>& tensors);

/// Throws CorruptCheckpoint on bad magic, version, checksum or truncation.
std::vector<TensorRecord> read_tensor_file(const std::filesystem::path& path);

/// Everything needed to resume training or run separation.
struct Checkpoint {
  ParameterSet params;
  MaskerConfig dims;
  StftConfig stft;
  std::optional<AdamState> optimizer;
};

/// Tensors are stored in single precision; loading yields the float-rounded
/// values, and saving a loaded checkpoint reproduces the file byte for byte.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace madt

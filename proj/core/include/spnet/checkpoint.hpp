#pragma once

#include <filesystem>
#include <span>

#include "spnet/parameter_store.hpp"

namespace spnet {

// Binary little-endian checkpoint:
//
//   "SPNC" | u32 version (1) | u32 entry count
//   per entry: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 data
//   u64 byte length of everything above
//
// Parameters only by default. With optimizer state, each parameter is followed
// by "<name>#adam.m" and "<name>#adam.v" entries and the file carries one
// "#adam.step" entry holding the shared step count.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path,
                     bool include_optimizer_state = false);
// Writes the entries of several stores into one file, in order.
void save_checkpoint(std::span<const ParameterStore* const> stores,
                     const std::filesystem::path& path, bool include_optimizer_state = false);

// Throws IoError, CorruptMagicError, VersionMismatchError or TruncatedFileError.
ParameterStore load_checkpoint(const std::filesystem::path& path);

}  // namespace spnet

// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, little-endian:
//
//   "MVSE"  u32 version
//   u64 n, config JSON (n bytes)
//   normalisation: 4 x (u64 n, n f64)  osm_mean, osm_std, gs_mean, gs_std
//   u64 count, then per parameter:
//     u64 n, name; u32 rank; rank x u64 dims; numel x f64
//   metadata: u64 best_epoch, f64 best_val_loss, u64 seed
//   u32 CRC-32 of every preceding byte
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mvse/encoders.hpp"
#include "mvse/train.hpp"

namespace mvse {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  MultiViewModel model;
  TrainingMetadata metadata;
};

std::string serialize_checkpoint(const MultiViewModel& model, const TrainingMetadata& metadata);
/// Verifies the checksum before parsing anything. Throws CheckpointError.
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes to a temporary file next to `path`, then renames it into place.
void save_checkpoint(const std::filesystem::path& path, const MultiViewModel& model,
                     const TrainingMetadata& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `bytes` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mvse

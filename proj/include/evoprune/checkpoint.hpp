#pragma once

// Checkpoint container, little-endian:
//
//   8 bytes   magic "EVOPRCKP"
//   u32       format version
//   u64       header length H
//   H bytes   JSON header: config, trajectory hash, architecture, counters,
//             metrics log, tensor manifest
//   payload   float32 tensors in manifest order: weights and biases per layer,
//             the same for momentum, then the population vector
//   u64       FNV-1a 64 of header + payload
//
// The shuffle RNG is a pure function of (seed, epoch), so the seed plus the
// epoch/batch counters are the complete RNG state.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evoprune/experiment.hpp"

namespace evoprune {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const TrainState& state);
TrainState deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes to a sibling temp file and renames it into place.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace evoprune

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "refl/config.hpp"
#include "refl/kg.hpp"
#include "refl/loss.hpp"
#include "refl/optim.hpp"

namespace refl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Versioned binary snapshot of a training run: config, seed split, pseudo
// seeds, parameter tables with optimizer state, and the negative cache.
// Little-endian field order with a trailing checksum; a resumed run is
// bit-identical to an uninterrupted one.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  RunConfig config;
  std::size_t epoch = 0;  // epochs completed
  SeedSplit split;
  std::vector<UnifiedPair> pseudo_pairs;
  ParameterStore params;
  NegativeCache negatives;
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);

// Throws std::runtime_error on version mismatch, truncation (length or
// checksum), or shape inconsistencies.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace refl

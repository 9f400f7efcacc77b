#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>

#include "pgsum/model.hpp"

namespace pgsum {

struct TrainState {
  ModelParams params;
  std::uint64_t step = 0;
  double best_valid_loss = std::numeric_limits<double>::infinity();
  std::uint64_t steps_since_best = 0;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, little-endian: magic "PGSUMCK\0", u32 version, model
/// config, step counters, then every parameter as (name, rank, dims, raw
/// doubles) in ModelParams::for_each order, closed by an FNV-1a checksum of
/// everything before it and the trailer "PGSUMEND".
std::string encode_checkpoint(const TrainState& state);
/// Throws DataError on a bad magic, version, truncation, checksum, or a
/// parameter that does not fit the stored config.
TrainState decode_checkpoint(const std::string& bytes);

/// Writes through a temporary file in the same directory, then renames.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace pgsum

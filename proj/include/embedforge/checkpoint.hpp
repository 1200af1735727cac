#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "embedforge/adam.hpp"
#include "embedforge/nn.hpp"

namespace embedforge {

inline constexpr int kCheckpointFormatVersion = 1;

// Everything needed to resume training bit-exactly.
struct Checkpoint {
  MlpParams params;
  AdamState adam;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_counter = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
// Throws FormatError on schema problems, ConfigError on inconsistent shapes.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

// Writes through a temporary file and renames, so readers never see a
// partially written checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Shared helper: write `contents` to `path` via a sibling temp file + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace embedforge


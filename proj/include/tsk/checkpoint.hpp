#pragma once

// Model checkpoints ("TSKM").
//
// Layout, all integers little-endian:
//   "TSKM" | u32 version | u32 n | n bytes of JSON {"head": HeadConfig, "task": ...}
//   | u32 tensor count | per tensor: u32 name length, name, u32 rank,
//     rank x u32 dims, row-major f64 values

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "tsk/heads.hpp"
#include "tsk/io_error.hpp"

namespace tsk {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json to_json(const HeadConfig& config);
HeadConfig head_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  Model model;
  /// Task the model was trained for; empty when unknown.
  std::string task;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tsk

#pragma once

// "TSKF" feature files.
//
// Layout, little-endian: "TSKF" | u32 version | u32 T | u32 D | f32 fps |
// T*D f32 values, row-major. Values are held as doubles in memory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tsk/io_error.hpp"
#include "tsk/tensor.hpp"

namespace tsk {

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

struct FeatureSequence {
  Tensor values;  // [T x D]
  double fps = 0.0;
  std::string source_id;

  std::size_t frames() const { return values.dim(0); }
  std::size_t dim() const { return values.dim(1); }

  /// T >= 1, D >= 1, every value finite.
  void validate() const;
};

std::string encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::string_view bytes, std::string source_id = {});

void write_features(const std::filesystem::path& path, const FeatureSequence& seq);
/// The file stem becomes the source id.
FeatureSequence read_features(const std::filesystem::path& path);

}  // namespace tsk

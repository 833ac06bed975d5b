#include "tsk/features.hpp"

#include <cmath>

#include "byte_io.hpp"

namespace tsk {

void FeatureSequence::validate() const {
  if (values.rank() != 2 || values.dim(0) == 0 || values.dim(1) == 0) {
    throw FormatError(FormatErrorKind::invalid, "feature sequence must be [T x D] with T, D >= 1, got " +
                                                    to_string(values.shape()));
  }
  if (!values.all_finite()) throw FormatError(FormatErrorKind::invalid, "feature sequence has non-finite values");
}

std::string encode_features(const FeatureSequence& seq) {
  seq.validate();
  detail::ByteWriter out;
  out.raw("TSKF");
  out.u32(kFeatureFormatVersion);
  out.u32(static_cast<std::uint32_t>(seq.frames()));
  out.u32(static_cast<std::uint32_t>(seq.dim()));
  out.f32(static_cast<float>(seq.fps));
  for (double x : seq.values.data()) out.f32(static_cast<float>(x));
  return out.bytes();
}

FeatureSequence decode_features(std::string_view bytes, std::string source_id) {
  detail::ByteReader in(bytes);
  if (in.raw(4, "magic") != "TSKF") throw FormatError(FormatErrorKind::bad_magic, "not a TSKF feature file");
  const std::uint32_t version = in.u32("version");
  if (version != kFeatureFormatVersion) {
    throw FormatError(FormatErrorKind::bad_version, "feature format version " + std::to_string(version));
  }
  const std::uint32_t frames = in.u32("header");
  const std::uint32_t dim = in.u32("header");
  const float fps = in.f32("header");
  if (frames == 0 || dim == 0) {
    throw FormatError(FormatErrorKind::invalid, "header declares T=" + std::to_string(frames) +
                                                    ", D=" + std::to_string(dim));
  }
  const std::size_t n = static_cast<std::size_t>(frames) * dim;
  if (in.remaining() / sizeof(float) < n) {
    throw FormatError(FormatErrorKind::truncated, "file holds fewer than " + std::to_string(n) + " values");
  }
  std::vector<double> values(n);
  for (double& x : values) x = in.f32("values");
  if (in.remaining() != 0) throw FormatError(FormatErrorKind::invalid, "trailing bytes after feature values");
  FeatureSequence seq{Tensor({frames, dim}, std::move(values)), fps, std::move(source_id)};
  seq.validate();
  return seq;
}

void write_features(const std::filesystem::path& path, const FeatureSequence& seq) {
  detail::write_file(path, encode_features(seq));
}

FeatureSequence read_features(const std::filesystem::path& path) {
  return decode_features(detail::read_file(path), path.stem().string());
}

}  // namespace tsk

#pragma once

// Clip and video annotations in JSON.
//
// Segmented: [{"id": "c1", "labels": ["swing", "hit"],
//              "pitch_type": "fastball", "pitch_speed": 95.0}, ...]
// Continuous: [{"id": "v1", "frames": 300,
//               "events": [{"label": "strike", "start": 10, "end": 24}]}, ...]
// Event ranges are inclusive.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tsk/tensor.hpp"

namespace tsk {

/// ball, strike, swing, hit, foul, in_play, bunt, hit_by_pitch
const std::vector<std::string>& mlb_activity_classes();
inline constexpr std::string_view kNoActivity = "no_activity";

enum class PitchType { fastball, sinker, curveball, changeup, slider, knuckle_curve };
inline constexpr std::size_t kPitchTypeCount = 6;

std::string_view to_string(PitchType type);
std::optional<PitchType> parse_pitch_type(std::string_view text);

enum class AnnotationErrorKind { malformed_json, unknown_class, pitch_without_activity, invalid_field };

class AnnotationError : public std::invalid_argument {
 public:
  AnnotationError(AnnotationErrorKind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  AnnotationErrorKind kind() const noexcept { return kind_; }

 private:
  AnnotationErrorKind kind_;
};

struct SegmentedAnnotation {
  std::string id;
  std::vector<std::uint8_t> labels;  // multi-hot over the vocabulary
  std::optional<PitchType> pitch_type;
  std::optional<double> pitch_speed;  // mph

  bool has_activity() const;
  Tensor label_vector() const;
  friend bool operator==(const SegmentedAnnotation&, const SegmentedAnnotation&) = default;
};

std::vector<SegmentedAnnotation> parse_segmented_annotations(
    std::string_view json_text, std::span<const std::string> classes = mlb_activity_classes());
std::string serialize_segmented_annotations(std::span<const SegmentedAnnotation> annotations,
                                            std::span<const std::string> classes = mlb_activity_classes());

struct Interval {
  std::size_t class_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct ContinuousAnnotation {
  std::string id;
  std::size_t frames = 0;
  std::vector<Interval> events;

  /// [T x C] 0/1 matrix; frame t of class c is 1 iff an event covers it.
  Tensor frame_labels(std::size_t classes) const;
  void validate(std::size_t classes) const;
  friend bool operator==(const ContinuousAnnotation&, const ContinuousAnnotation&) = default;
};

std::vector<ContinuousAnnotation> parse_continuous_annotations(std::string_view json_text,
                                                               std::span<const std::string> classes);
std::string serialize_continuous_annotations(std::span<const ContinuousAnnotation> annotations,
                                             std::span<const std::string> classes);

}  // namespace tsk

#pragma once

// Planted-motif synthetic data. Each class owns a fixed unit direction in
// feature space; a clip carries class evidence only over a short interval.
// Every clip is a pure function of (spec, index).

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsk/annotations.hpp"
#include "tsk/features.hpp"
#include "tsk/tensor.hpp"

namespace tsk {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SyntheticSpec {
  std::size_t classes = 6;
  std::size_t t_min = 40;
  std::size_t t_max = 80;
  std::size_t dim = 32;
  std::size_t motif_min = 3;
  std::size_t motif_max = 8;
  double amplitude = 2.0;
  double noise = 1.0;
  double label_prob = 0.3;
  /// Chance that an absent class leaks a weak, clip-wide copy of its motif
  /// (same total energy, spread over every frame).
  double hard_negative_prob = 0.5;
  /// Motif centers sit near a per-class anchor, jittered by this fraction of T.
  double position_jitter = 0.08;
  double fps = 8.0;
  std::uint64_t seed = 0;

  // Continuous videos: event count uniform in [events_mean - spread, events_mean + spread].
  std::size_t events_mean = 7;
  std::size_t events_spread = 2;
  std::size_t gap_min = 4;

  // Speed clips: motif duration = round(fps * speed_constant / mph).
  double speed_constant = 20.0;
  double mph_min = 70.0;
  double mph_max = 100.0;

  void validate() const;
  std::size_t max_events() const { return events_mean + events_spread; }
};

/// Seeded per-class directions ([C x D], orthonormal when C <= D) and
/// anchor positions (fractions of T).
struct SyntheticWorld {
  Tensor directions;
  std::vector<double> anchors;
};
SyntheticWorld make_world(const SyntheticSpec& spec);

/// Default vocabulary: the MLB activity names while they last, then class_k.
std::vector<std::string> synthetic_class_names(std::size_t classes);

struct SegmentedClip {
  FeatureSequence features;
  std::vector<std::uint8_t> labels;
  std::vector<Interval> motifs;
};
SegmentedClip generate_segmented_clip(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index);
std::vector<SegmentedClip> generate_synthetic_segmented(const SyntheticSpec& spec, std::size_t clips);

struct ContinuousVideo {
  FeatureSequence features;
  ContinuousAnnotation annotation;
};
/// Throws SpecError when max_events() motifs of motif_max frames with gap_min
/// frames of background around each cannot fit in t_min frames.
ContinuousVideo generate_continuous_video(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index);
std::vector<ContinuousVideo> generate_synthetic_continuous(const SyntheticSpec& spec, std::size_t videos);

std::size_t speed_motif_duration(double fps, double speed_constant, double mph);

struct SpeedClip {
  FeatureSequence features;
  double mph = 0.0;
  std::size_t duration = 0;
};
SpeedClip generate_speed_clip(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index);
std::vector<SpeedClip> generate_synthetic_speed(const SyntheticSpec& spec, std::size_t clips);

/// Measures the motif's extent along class-0's direction and inverts the
/// duration formula.
double speed_oracle(const SyntheticSpec& spec, const SyntheticWorld& world, const Tensor& features);

struct PitchClip {
  FeatureSequence features;
  PitchType pitch = PitchType::fastball;
};
/// One motif per clip; class k of the world is pitch type k. Requires classes == 6.
PitchClip generate_pitch_clip(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index);
std::vector<PitchClip> generate_synthetic_pitch(const SyntheticSpec& spec, std::size_t clips);

/// Per-class score: the best mean projection onto the class direction over
/// any window of motif_min frames.
Tensor interval_oracle_scores(const SyntheticSpec& spec, const SyntheticWorld& world, const Tensor& features);

}  // namespace tsk

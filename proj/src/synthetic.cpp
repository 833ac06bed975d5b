#include "tsk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tsk/random.hpp"

namespace tsk {

namespace {

constexpr std::uint64_t kWorldStream = 1ULL << 40;

std::size_t draw_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

Tensor background(std::mt19937_64& rng, std::size_t frames, std::size_t dim, double noise) {
  Tensor v({frames, dim});
  if (noise == 0.0) return v;
  for (double& x : v.data()) x = noise * normal(rng);
  return v;
}

void plant(Tensor& v, const SyntheticWorld& world, std::size_t cls, std::size_t start, std::size_t length,
           double amplitude) {
  const auto u = world.directions.row(cls);
  for (std::size_t t = start; t < start + length; ++t) {
    auto frame = v.row(t);
    for (std::size_t d = 0; d < frame.size(); ++d) frame[d] += amplitude * u[d];
  }
}

/// Motif start near the class anchor, kept inside the clip.
std::size_t anchored_start(std::mt19937_64& rng, const SyntheticSpec& spec, double anchor, std::size_t frames,
                           std::size_t length) {
  const double T = static_cast<double>(frames);
  const double center = anchor * T + spec.position_jitter * T * uniform(rng, -1.0, 1.0);
  const double start = std::round(center - 0.5 * static_cast<double>(length));
  return static_cast<std::size_t>(std::clamp(start, 0.0, static_cast<double>(frames - length)));
}

std::string clip_id(const char* prefix, std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return std::string(prefix) + "_" + digits;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (classes == 0 || dim == 0) throw SpecError("synthetic spec: classes and dim must be >= 1");
  if (t_min == 0 || t_min > t_max) throw SpecError("synthetic spec: need 1 <= t_min <= t_max");
  if (motif_min == 0 || motif_min > motif_max) throw SpecError("synthetic spec: need 1 <= motif_min <= motif_max");
  if (motif_max > t_min) throw SpecError("synthetic spec: motif_max exceeds t_min");
  if (!(noise >= 0.0) || !std::isfinite(amplitude)) throw SpecError("synthetic spec: noise must be >= 0");
  if (!(label_prob >= 0.0 && label_prob <= 1.0) || !(hard_negative_prob >= 0.0 && hard_negative_prob <= 1.0)) {
    throw SpecError("synthetic spec: probabilities must lie in [0, 1]");
  }
  if (!(position_jitter >= 0.0) || !(fps > 0.0)) throw SpecError("synthetic spec: need jitter >= 0 and fps > 0");
  if (events_spread > events_mean) throw SpecError("synthetic spec: events_spread exceeds events_mean");
  if (!(mph_min > 0.0 && mph_min <= mph_max) || !(speed_constant > 0.0)) {
    throw SpecError("synthetic spec: need 0 < mph_min <= mph_max and speed_constant > 0");
  }
}

SyntheticWorld make_world(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(mix_seed(spec.seed, kWorldStream));
  SyntheticWorld world{Tensor({spec.classes, spec.dim}), {}};
  for (std::size_t c = 0; c < spec.classes; ++c) {
    auto u = world.directions.row(c);
    for (double& x : u) x = normal(rng);
    if (spec.classes <= spec.dim) {
      for (std::size_t p = 0; p < c; ++p) {
        const auto q = world.directions.row(p);
        double dot = 0.0;
        for (std::size_t d = 0; d < u.size(); ++d) dot += u[d] * q[d];
        for (std::size_t d = 0; d < u.size(); ++d) u[d] -= dot * q[d];
      }
    }
    double norm = 0.0;
    for (double x : u) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : u) x /= norm;
  }
  for (std::size_t c = 0; c < spec.classes; ++c) world.anchors.push_back(uniform(rng, 0.15, 0.85));
  return world;
}

std::vector<std::string> synthetic_class_names(std::size_t classes) {
  const auto& mlb = mlb_activity_classes();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    names.push_back(classes <= mlb.size() ? mlb[c] : "class_" + std::to_string(c));
  }
  return names;
}

SegmentedClip generate_segmented_clip(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index) {
  std::mt19937_64 rng(mix_seed(spec.seed, index));
  const std::size_t frames = draw_size(rng, spec.t_min, spec.t_max);
  SegmentedClip clip;
  clip.features.values = background(rng, frames, spec.dim, spec.noise);
  clip.features.fps = spec.fps;
  clip.features.source_id = clip_id("clip", index);
  clip.labels.assign(spec.classes, 0);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const bool present = uniform01(rng) < spec.label_prob;
    const std::size_t length = draw_size(rng, spec.motif_min, spec.motif_max);
    if (present) {
      const std::size_t start = anchored_start(rng, spec, world.anchors[c], frames, length);
      plant(clip.features.values, world, c, start, length, spec.amplitude);
      clip.labels[c] = 1;
      clip.motifs.push_back({c, start, start + length - 1});
    } else if (uniform01(rng) < spec.hard_negative_prob) {
      const double diffuse = spec.amplitude * static_cast<double>(length) / static_cast<double>(frames);
      plant(clip.features.values, world, c, 0, frames, diffuse);
    }
  }
  return clip;
}

std::vector<SegmentedClip> generate_synthetic_segmented(const SyntheticSpec& spec, std::size_t clips) {
  const SyntheticWorld world = make_world(spec);
  std::vector<SegmentedClip> out;
  out.reserve(clips);
  for (std::size_t i = 0; i < clips; ++i) out.push_back(generate_segmented_clip(spec, world, i));
  return out;
}

ContinuousVideo generate_continuous_video(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index) {
  const std::size_t most = spec.max_events();
  if (most * spec.motif_max + (most + 1) * spec.gap_min > spec.t_min) {
    throw SpecError("synthetic spec: " + std::to_string(most) + " events of up to " + std::to_string(spec.motif_max) +
                    " frames with gaps of " + std::to_string(spec.gap_min) + " do not fit in " +
                    std::to_string(spec.t_min) + " frames");
  }
  std::mt19937_64 rng(mix_seed(spec.seed, index));
  const std::size_t frames = draw_size(rng, spec.t_min, spec.t_max);
  const std::size_t events = draw_size(rng, spec.events_mean - spec.events_spread, most);

  ContinuousVideo video;
  video.features.values = background(rng, frames, spec.dim, spec.noise);
  video.features.fps = spec.fps;
  video.features.source_id = clip_id("video", index);
  video.annotation.id = video.features.source_id;
  video.annotation.frames = frames;

  std::vector<std::size_t> classes(events), lengths(events);
  std::size_t busy = (events + 1) * spec.gap_min;
  for (std::size_t e = 0; e < events; ++e) {
    classes[e] = draw_size(rng, 0, spec.classes - 1);
    lengths[e] = draw_size(rng, spec.motif_min, spec.motif_max);
    busy += lengths[e];
  }
  // Spread the free frames over the events + 1 gaps with sorted cut points.
  const std::size_t slack = frames - busy;
  std::vector<std::size_t> cuts(events);
  for (auto& cut : cuts) cut = draw_size(rng, 0, slack);
  std::sort(cuts.begin(), cuts.end());

  std::size_t cursor = 0, previous_cut = 0;
  for (std::size_t e = 0; e < events; ++e) {
    cursor += spec.gap_min + (cuts[e] - previous_cut);
    previous_cut = cuts[e];
    plant(video.features.values, world, classes[e], cursor, lengths[e], spec.amplitude);
    video.annotation.events.push_back({classes[e], cursor, cursor + lengths[e] - 1});
    cursor += lengths[e];
  }
  return video;
}

std::vector<ContinuousVideo> generate_synthetic_continuous(const SyntheticSpec& spec, std::size_t videos) {
  const SyntheticWorld world = make_world(spec);
  std::vector<ContinuousVideo> out;
  out.reserve(videos);
  for (std::size_t i = 0; i < videos; ++i) out.push_back(generate_continuous_video(spec, world, i));
  return out;
}

std::size_t speed_motif_duration(double fps, double speed_constant, double mph) {
  return static_cast<std::size_t>(std::lround(fps * speed_constant / mph));
}

SpeedClip generate_speed_clip(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index) {
  const std::size_t longest = speed_motif_duration(spec.fps, spec.speed_constant, spec.mph_min);
  if (longest == 0 || longest > spec.t_min) {
    throw SpecError("synthetic spec: speed motif of " + std::to_string(longest) + " frames does not fit in t_min");
  }
  std::mt19937_64 rng(mix_seed(spec.seed, index));
  const std::size_t frames = draw_size(rng, spec.t_min, spec.t_max);
  SpeedClip clip;
  clip.mph = uniform(rng, spec.mph_min, spec.mph_max);
  clip.duration = speed_motif_duration(spec.fps, spec.speed_constant, clip.mph);
  const std::size_t start = draw_size(rng, 0, frames - clip.duration);
  clip.features.values = background(rng, frames, spec.dim, spec.noise);
  clip.features.fps = spec.fps;
  clip.features.source_id = clip_id("pitch", index);
  plant(clip.features.values, world, 0, start, clip.duration, spec.amplitude);
  return clip;
}

std::vector<SpeedClip> generate_synthetic_speed(const SyntheticSpec& spec, std::size_t clips) {
  const SyntheticWorld world = make_world(spec);
  std::vector<SpeedClip> out;
  out.reserve(clips);
  for (std::size_t i = 0; i < clips; ++i) out.push_back(generate_speed_clip(spec, world, i));
  return out;
}

double speed_oracle(const SyntheticSpec& spec, const SyntheticWorld& world, const Tensor& features) {
  const auto u = world.directions.row(0);
  std::size_t duration = 0;
  for (std::size_t t = 0; t < features.dim(0); ++t) {
    const auto frame = features.row(t);
    double projection = 0.0;
    for (std::size_t d = 0; d < frame.size(); ++d) projection += frame[d] * u[d];
    if (projection > 0.5 * spec.amplitude) ++duration;
  }
  return spec.fps * spec.speed_constant / static_cast<double>(std::max<std::size_t>(duration, 1));
}

PitchClip generate_pitch_clip(const SyntheticSpec& spec, const SyntheticWorld& world, std::size_t index) {
  if (spec.classes != kPitchTypeCount) throw SpecError("synthetic spec: pitch clips need exactly 6 classes");
  std::mt19937_64 rng(mix_seed(spec.seed, index));
  const std::size_t frames = draw_size(rng, spec.t_min, spec.t_max);
  const std::size_t cls = draw_size(rng, 0, kPitchTypeCount - 1);
  const std::size_t length = draw_size(rng, spec.motif_min, spec.motif_max);
  PitchClip clip;
  clip.pitch = static_cast<PitchType>(cls);
  clip.features.values = background(rng, frames, spec.dim, spec.noise);
  clip.features.fps = spec.fps;
  clip.features.source_id = clip_id("pitch", index);
  const std::size_t start = anchored_start(rng, spec, world.anchors[cls], frames, length);
  plant(clip.features.values, world, cls, start, length, spec.amplitude);
  return clip;
}

std::vector<PitchClip> generate_synthetic_pitch(const SyntheticSpec& spec, std::size_t clips) {
  const SyntheticWorld world = make_world(spec);
  std::vector<PitchClip> out;
  out.reserve(clips);
  for (std::size_t i = 0; i < clips; ++i) out.push_back(generate_pitch_clip(spec, world, i));
  return out;
}

Tensor interval_oracle_scores(const SyntheticSpec& spec, const SyntheticWorld& world, const Tensor& features) {
  const std::size_t frames = features.dim(0), window = std::min(spec.motif_min, frames);
  Tensor scores({spec.classes});
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const auto u = world.directions.row(c);
    std::vector<double> projection(frames, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      const auto frame = features.row(t);
      for (std::size_t d = 0; d < frame.size(); ++d) projection[t] += frame[d] * u[d];
    }
    double best = -INFINITY;
    for (std::size_t s = 0; s + window <= frames; ++s) {
      double total = 0.0;
      for (std::size_t t = s; t < s + window; ++t) total += projection[t];
      best = std::max(best, total / static_cast<double>(window));
    }
    scores[c] = best;
  }
  return scores;
}

}  // namespace tsk

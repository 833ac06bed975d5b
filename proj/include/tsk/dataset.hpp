#pragma once

// Dataset manifests tie feature files to annotation records.
//
// manifest.json:
//   {"version": 1, "task": "multilabel", "classes": [...], "fps": 8.0,
//    "annotations": "annotations.json",
//    "entries": [{"id": "clip_00000", "features": "features/clip_00000.tskf",
//                 "split": "train"}, ...]}
// Relative paths resolve against the manifest's directory.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tsk/synthetic.hpp"
#include "tsk/training.hpp"

namespace tsk {

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string id;
  std::filesystem::path features;
  std::string split;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  Task task = Task::multilabel;
  std::vector<std::string> classes;
  double fps = 0.0;
  std::filesystem::path annotations = "annotations.json";
  std::vector<ManifestEntry> entries;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

std::string serialize_manifest(const Manifest& manifest);
/// Throws FormatError(invalid) on schema violations.
Manifest parse_manifest(std::string_view json_text);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Load the examples of a manifest whose split matches `split` ("all" keeps
/// every entry). Targets follow the task layout documented on Example.
std::vector<Example> load_examples(const std::filesystem::path& manifest_path, const std::string& split = "all");

// In-memory conversions of generated data into training examples.
std::vector<Example> segmented_examples(const std::vector<SegmentedClip>& clips);
std::vector<Example> continuous_examples(const std::vector<ContinuousVideo>& videos, std::size_t classes);
std::vector<Example> speed_examples(const std::vector<SpeedClip>& clips);
std::vector<Example> pitch_examples(const std::vector<PitchClip>& clips);

/// Entry i is "train" when i < round(train_fraction * n), else "test".
std::string split_for(std::size_t index, std::size_t count, double train_fraction = 0.7);

/// Generator defaults per task: multilabel uses the plain spec defaults,
/// detection long videos with 7 +- 2 events, speed noiseless 60 fps clips,
/// pitch_type six classes.
SyntheticSpec task_preset(Task task);

/// Generate `count` items for the task and write features, annotations and
/// the manifest under `dir`. Returns the manifest.
Manifest write_synthetic_dataset(const std::filesystem::path& dir, Task task, const SyntheticSpec& spec,
                                 std::size_t count);

}  // namespace tsk

#include "tsk/dataset.hpp"

#include <cmath>
#include <map>

#include <json.hpp>

#include "byte_io.hpp"
#include "tsk/annotations.hpp"
#include "tsk/features.hpp"

namespace tsk {

using nlohmann::json;

std::string serialize_manifest(const Manifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id}, {"features", e.features.generic_string()}, {"split", e.split}});
  }
  const json doc{{"version", kManifestVersion},
                 {"task", to_string(manifest.task)},
                 {"classes", manifest.classes},
                 {"fps", manifest.fps},
                 {"annotations", manifest.annotations.generic_string()},
                 {"entries", entries}};
  return doc.dump(1) + "\n";
}

Manifest parse_manifest(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    if (doc.at("version").get<int>() != kManifestVersion) {
      throw FormatError(FormatErrorKind::bad_version, "unsupported manifest version");
    }
    Manifest m;
    m.task = parse_task(doc.at("task").get<std::string>());
    m.classes = doc.at("classes").get<std::vector<std::string>>();
    m.fps = doc.at("fps").get<double>();
    m.annotations = doc.value("annotations", std::string("annotations.json"));
    for (const auto& e : doc.at("entries")) {
      m.entries.push_back({e.at("id").get<std::string>(), e.at("features").get<std::string>(),
                           e.value("split", std::string("train"))});
    }
    if (m.classes.empty()) throw FormatError(FormatErrorKind::invalid, "manifest lists no classes");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(FormatErrorKind::invalid, std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorKind::invalid, std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  detail::write_file(path, serialize_manifest(manifest));
}

Manifest read_manifest(const std::filesystem::path& path) { return parse_manifest(detail::read_file(path)); }

namespace {

Tensor scalar_target(double value) { return Tensor::scalar(value); }

}  // namespace

std::vector<Example> load_examples(const std::filesystem::path& manifest_path, const std::string& split) {
  const Manifest manifest = read_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  const std::string annotation_text = detail::read_file(root / manifest.annotations);

  std::map<std::string, Tensor> targets;
  if (manifest.task == Task::detection) {
    for (auto& a : parse_continuous_annotations(annotation_text, manifest.classes)) {
      targets[a.id] = a.frame_labels(manifest.classes.size());
    }
  } else if (manifest.task == Task::multilabel) {
    for (auto& a : parse_segmented_annotations(annotation_text, manifest.classes)) targets[a.id] = a.label_vector();
  } else {
    for (auto& a : parse_segmented_annotations(annotation_text)) {
      if (manifest.task == Task::speed) {
        if (!a.pitch_speed) throw FormatError(FormatErrorKind::invalid, "record '" + a.id + "' has no pitch_speed");
        targets[a.id] = scalar_target(*a.pitch_speed);
      } else {
        if (!a.pitch_type) throw FormatError(FormatErrorKind::invalid, "record '" + a.id + "' has no pitch_type");
        targets[a.id] = scalar_target(static_cast<double>(*a.pitch_type));
      }
    }
  }

  std::vector<Example> out;
  for (const auto& entry : manifest.entries) {
    if (split != "all" && entry.split != split) continue;
    const auto it = targets.find(entry.id);
    if (it == targets.end()) throw FormatError(FormatErrorKind::invalid, "no annotation for entry '" + entry.id + "'");
    FeatureSequence seq = read_features(root / entry.features);
    if (manifest.task == Task::detection && it->second.dim(0) != seq.frames()) {
      throw FormatError(FormatErrorKind::invalid, "entry '" + entry.id + "': annotation frame count differs from features");
    }
    out.push_back({entry.id, std::move(seq.values), it->second});
  }
  return out;
}

std::vector<Example> segmented_examples(const std::vector<SegmentedClip>& clips) {
  std::vector<Example> out;
  for (const auto& c : clips) {
    Tensor target({c.labels.size()});
    for (std::size_t i = 0; i < c.labels.size(); ++i) target[i] = c.labels[i];
    out.push_back({c.features.source_id, c.features.values, std::move(target)});
  }
  return out;
}

std::vector<Example> continuous_examples(const std::vector<ContinuousVideo>& videos, std::size_t classes) {
  std::vector<Example> out;
  for (const auto& v : videos) out.push_back({v.annotation.id, v.features.values, v.annotation.frame_labels(classes)});
  return out;
}

std::vector<Example> speed_examples(const std::vector<SpeedClip>& clips) {
  std::vector<Example> out;
  for (const auto& c : clips) out.push_back({c.features.source_id, c.features.values, scalar_target(c.mph)});
  return out;
}

std::vector<Example> pitch_examples(const std::vector<PitchClip>& clips) {
  std::vector<Example> out;
  for (const auto& c : clips) {
    out.push_back({c.features.source_id, c.features.values, scalar_target(static_cast<double>(c.pitch))});
  }
  return out;
}

SyntheticSpec task_preset(Task task) {
  SyntheticSpec spec;
  switch (task) {
    case Task::multilabel:
      break;
    case Task::detection:
      spec.t_min = 240;
      spec.t_max = 300;
      spec.motif_min = 6;
      spec.motif_max = 20;
      spec.hard_negative_prob = 0.0;
      break;
    case Task::speed:
      spec.classes = 1;
      spec.fps = 60.0;
      spec.t_min = spec.t_max = 40;
      spec.noise = 0.0;
      spec.hard_negative_prob = 0.0;
      break;
    case Task::pitch_type:
      spec.classes = kPitchTypeCount;
      spec.hard_negative_prob = 0.0;
      break;
  }
  return spec;
}

std::string split_for(std::size_t index, std::size_t count, double train_fraction) {
  const auto train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(count)));
  return index < train ? "train" : "test";
}

Manifest write_synthetic_dataset(const std::filesystem::path& dir, Task task, const SyntheticSpec& spec,
                                 std::size_t count) {
  const SyntheticWorld world = make_world(spec);
  Manifest manifest;
  manifest.task = task;
  manifest.fps = spec.fps;
  std::filesystem::create_directories(dir / "features");

  auto add_entry = [&](const FeatureSequence& seq, std::size_t index) {
    const std::filesystem::path rel = std::filesystem::path("features") / (seq.source_id + ".tskf");
    write_features(dir / rel, seq);
    manifest.entries.push_back({seq.source_id, rel, split_for(index, count)});
  };

  std::string annotations;
  switch (task) {
    case Task::multilabel: {
      manifest.classes = synthetic_class_names(spec.classes);
      std::vector<SegmentedAnnotation> records;
      for (std::size_t i = 0; i < count; ++i) {
        const auto clip = generate_segmented_clip(spec, world, i);
        add_entry(clip.features, i);
        records.push_back({clip.features.source_id, clip.labels, std::nullopt, std::nullopt});
      }
      annotations = serialize_segmented_annotations(records, manifest.classes);
      break;
    }
    case Task::detection: {
      manifest.classes = synthetic_class_names(spec.classes);
      std::vector<ContinuousAnnotation> records;
      for (std::size_t i = 0; i < count; ++i) {
        const auto video = generate_continuous_video(spec, world, i);
        add_entry(video.features, i);
        records.push_back(video.annotation);
      }
      annotations = serialize_continuous_annotations(records, manifest.classes);
      break;
    }
    case Task::speed:
    case Task::pitch_type: {
      const auto& mlb = mlb_activity_classes();
      std::vector<std::uint8_t> pitched(mlb.size(), 0);
      pitched[0] = 1;  // "ball": every synthetic clip contains a pitch
      std::vector<SegmentedAnnotation> records;
      for (std::size_t i = 0; i < count; ++i) {
        if (task == Task::speed) {
          const auto clip = generate_speed_clip(spec, world, i);
          add_entry(clip.features, i);
          records.push_back({clip.features.source_id, pitched, std::nullopt, clip.mph});
        } else {
          const auto clip = generate_pitch_clip(spec, world, i);
          add_entry(clip.features, i);
          records.push_back({clip.features.source_id, pitched, clip.pitch, std::nullopt});
        }
      }
      if (task == Task::speed) {
        manifest.classes = {"mph"};
      } else {
        for (std::size_t k = 0; k < kPitchTypeCount; ++k) {
          manifest.classes.emplace_back(to_string(static_cast<PitchType>(k)));
        }
      }
      annotations = serialize_segmented_annotations(records);
      break;
    }
  }
  detail::write_file(dir / manifest.annotations, annotations + "\n");
  write_manifest(dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace tsk

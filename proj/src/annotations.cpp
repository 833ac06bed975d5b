#include "tsk/annotations.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <json.hpp>

namespace tsk {

using nlohmann::json;

const std::vector<std::string>& mlb_activity_classes() {
  static const std::vector<std::string> classes{"ball", "strike", "swing",   "hit",
                                                "foul", "in_play", "bunt", "hit_by_pitch"};
  return classes;
}

namespace {

constexpr std::array<std::string_view, kPitchTypeCount> kPitchNames{
    "fastball", "sinker", "curveball", "changeup", "slider", "knuckle_curve"};

std::size_t class_index(std::span<const std::string> classes, const std::string& label, const std::string& id) {
  const auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) {
    throw AnnotationError(AnnotationErrorKind::unknown_class, "record '" + id + "': unknown label '" + label + "'");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

json parse_array(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw AnnotationError(AnnotationErrorKind::malformed_json, e.what());
  }
  if (!doc.is_array()) throw AnnotationError(AnnotationErrorKind::malformed_json, "expected a JSON array of records");
  return doc;
}

template <typename T>
T field(const json& record, const char* key, const std::string& id) {
  try {
    return record.at(key).get<T>();
  } catch (const json::exception&) {
    throw AnnotationError(AnnotationErrorKind::invalid_field, "record '" + id + "': missing or invalid '" + key + "'");
  }
}

}  // namespace

std::string_view to_string(PitchType type) { return kPitchNames[static_cast<std::size_t>(type)]; }

std::optional<PitchType> parse_pitch_type(std::string_view text) {
  const std::string normalized = text == "knuckle-curve" ? std::string("knuckle_curve") : std::string(text);
  for (std::size_t i = 0; i < kPitchNames.size(); ++i) {
    if (kPitchNames[i] == normalized) return static_cast<PitchType>(i);
  }
  return std::nullopt;
}

bool SegmentedAnnotation::has_activity() const {
  return std::any_of(labels.begin(), labels.end(), [](std::uint8_t z) { return z != 0; });
}

Tensor SegmentedAnnotation::label_vector() const {
  Tensor out({labels.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i];
  return out;
}

std::vector<SegmentedAnnotation> parse_segmented_annotations(std::string_view json_text,
                                                             std::span<const std::string> classes) {
  const json doc = parse_array(json_text);
  std::vector<SegmentedAnnotation> out;
  for (const auto& record : doc) {
    if (!record.is_object()) throw AnnotationError(AnnotationErrorKind::malformed_json, "record is not an object");
    SegmentedAnnotation a;
    a.id = field<std::string>(record, "id", "?");
    a.labels.assign(classes.size(), 0);
    bool no_activity = false;
    for (const auto& label : field<std::vector<std::string>>(record, "labels", a.id)) {
      if (label == kNoActivity) {
        no_activity = true;
        continue;
      }
      a.labels[class_index(classes, label, a.id)] = 1;
    }
    if (no_activity && a.has_activity()) {
      throw AnnotationError(AnnotationErrorKind::invalid_field,
                            "record '" + a.id + "': no_activity combined with activity labels");
    }
    if (record.contains("pitch_type")) {
      const auto text = field<std::string>(record, "pitch_type", a.id);
      a.pitch_type = parse_pitch_type(text);
      if (!a.pitch_type) {
        throw AnnotationError(AnnotationErrorKind::invalid_field, "record '" + a.id + "': unknown pitch type '" + text + "'");
      }
    }
    if (record.contains("pitch_speed")) {
      const double mph = field<double>(record, "pitch_speed", a.id);
      if (!std::isfinite(mph) || mph <= 0.0) {
        throw AnnotationError(AnnotationErrorKind::invalid_field, "record '" + a.id + "': pitch_speed must be positive");
      }
      a.pitch_speed = mph;
    }
    if ((a.pitch_type || a.pitch_speed) && !a.has_activity()) {
      throw AnnotationError(AnnotationErrorKind::pitch_without_activity,
                            "record '" + a.id + "': pitch_type/pitch_speed given without a pitch label");
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string serialize_segmented_annotations(std::span<const SegmentedAnnotation> annotations,
                                            std::span<const std::string> classes) {
  json doc = json::array();
  for (const auto& a : annotations) {
    json labels = json::array();
    for (std::size_t c = 0; c < a.labels.size() && c < classes.size(); ++c) {
      if (a.labels[c]) labels.push_back(classes[c]);
    }
    if (labels.empty()) labels.push_back(kNoActivity);
    json record{{"id", a.id}, {"labels", labels}};
    if (a.pitch_type) record["pitch_type"] = to_string(*a.pitch_type);
    if (a.pitch_speed) record["pitch_speed"] = *a.pitch_speed;
    doc.push_back(std::move(record));
  }
  return doc.dump(1);
}

Tensor ContinuousAnnotation::frame_labels(std::size_t classes) const {
  validate(classes);
  Tensor out({frames, classes});
  for (const auto& e : events)
    for (std::size_t t = e.start; t <= e.end; ++t) out.at(t, e.class_index) = 1.0;
  return out;
}

void ContinuousAnnotation::validate(std::size_t classes) const {
  if (frames == 0) throw AnnotationError(AnnotationErrorKind::invalid_field, "video '" + id + "' has no frames");
  for (const auto& e : events) {
    if (e.start > e.end || e.end >= frames || e.class_index >= classes) {
      throw AnnotationError(AnnotationErrorKind::invalid_field,
                            "video '" + id + "': event [" + std::to_string(e.start) + ", " + std::to_string(e.end) +
                                "] outside 0.." + std::to_string(frames - 1));
    }
  }
}

std::vector<ContinuousAnnotation> parse_continuous_annotations(std::string_view json_text,
                                                               std::span<const std::string> classes) {
  const json doc = parse_array(json_text);
  std::vector<ContinuousAnnotation> out;
  for (const auto& record : doc) {
    if (!record.is_object()) throw AnnotationError(AnnotationErrorKind::malformed_json, "record is not an object");
    ContinuousAnnotation a;
    a.id = field<std::string>(record, "id", "?");
    a.frames = field<std::size_t>(record, "frames", a.id);
    for (const auto& event : record.value("events", json::array())) {
      Interval iv;
      iv.class_index = class_index(classes, field<std::string>(event, "label", a.id), a.id);
      iv.start = field<std::size_t>(event, "start", a.id);
      iv.end = field<std::size_t>(event, "end", a.id);
      a.events.push_back(iv);
    }
    a.validate(classes.size());
    out.push_back(std::move(a));
  }
  return out;
}

std::string serialize_continuous_annotations(std::span<const ContinuousAnnotation> annotations,
                                             std::span<const std::string> classes) {
  json doc = json::array();
  for (const auto& a : annotations) {
    json events = json::array();
    for (const auto& e : a.events) {
      events.push_back({{"label", classes[e.class_index]}, {"start", e.start}, {"end", e.end}});
    }
    doc.push_back({{"id", a.id}, {"frames", a.frames}, {"events", events}});
  }
  return doc.dump(1);
}

}  // namespace tsk

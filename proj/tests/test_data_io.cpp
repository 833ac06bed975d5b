#include <doctest.h>

#include <fstream>
#include <iterator>
#include <map>

#include "golden_cases.hpp"
#include "support.hpp"
#include "tsk/annotations.hpp"
#include "tsk/dataset.hpp"
#include "tsk/features.hpp"
#include "tsk/metrics.hpp"
#include "tsk/synthetic.hpp"

using namespace tsk;
using tsk::test::random_tensor;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FormatErrorKind decode_error(std::string_view bytes) {
  try {
    decode_features(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode succeeded");
  return FormatErrorKind::invalid;
}

AnnotationErrorKind annotation_error(const std::string& json) {
  try {
    parse_segmented_annotations(json);
  } catch (const AnnotationError& e) {
    return e.kind();
  }
  FAIL("parse succeeded: " << json);
  return AnnotationErrorKind::invalid_field;
}

}  // namespace

TEST_CASE("TSKF round trip within f32") {
  std::mt19937_64 rng(61);
  FeatureSequence seq{random_tensor(rng, {5, 3}), 8.0, "clip"};
  const FeatureSequence back = decode_features(encode_features(seq), "clip");
  REQUIRE(back.values.shape() == Shape{5, 3});
  for (std::size_t i = 0; i < 15; ++i) CHECK(back.values[i] == static_cast<double>(static_cast<float>(seq.values[i])));
  CHECK(back.fps == 8.0);
  CHECK(encode_features(back) == encode_features(seq));

  const auto dir = tsk::test::scratch_dir("tskf");
  write_features(dir / "abc.tskf", seq);
  CHECK(read_features(dir / "abc.tskf").source_id == "abc");
  CHECK_THROWS_AS(read_features(dir / "missing.tskf"), IoError);
}

TEST_CASE("TSKF golden layout") {
  const std::string golden = slurp(tsk::test::golden_dir() / "features_small.tskf");
  REQUIRE(golden.size() == 44);
  const FeatureSequence seq{Tensor({2, 3}, {0.5, -1.25, 2.0, 0.0, 3.75, -0.125}), 8.0, ""};
  CHECK(encode_features(seq) == golden);
  CHECK(decode_features(golden).values == seq.values);
}

TEST_CASE("TSKF error kinds") {
  const std::string good = encode_features({Tensor({2, 2}, {1, 2, 3, 4}), 3.0, ""});
  CHECK(decode_error(good.substr(0, 10)) == FormatErrorKind::truncated);
  CHECK(decode_error(good.substr(0, good.size() - 1)) == FormatErrorKind::truncated);
  std::string magic = good;
  magic[0] = 'X';
  CHECK(decode_error(magic) == FormatErrorKind::bad_magic);
  std::string version = good;
  version[4] = 9;
  CHECK(decode_error(version) == FormatErrorKind::bad_version);
  std::string zero_t = good;
  zero_t[8] = 0;
  CHECK(decode_error(zero_t) == FormatErrorKind::invalid);
  CHECK(decode_error(good + "x") == FormatErrorKind::invalid);
  CHECK_THROWS_AS(encode_features({Tensor({1, 1}, {std::nan("")}), 1.0, ""}), FormatError);
}

TEST_CASE("segmented annotations") {
  auto a = parse_segmented_annotations(R"([{"id":"c1","labels":["swing","hit"]}])");
  REQUIRE(a.size() == 1);
  CHECK(a[0].labels == std::vector<std::uint8_t>{0, 0, 1, 1, 0, 0, 0, 0});

  a = parse_segmented_annotations(R"([{"id":"c3","labels":["ball"],"pitch_type":"fastball","pitch_speed":95.0}])");
  CHECK(a[0].pitch_type == PitchType::fastball);
  CHECK(a[0].pitch_speed == 95.0);
  a = parse_segmented_annotations(R"([{"id":"c4","labels":["strike"],"pitch_type":"knuckle-curve"}])");
  CHECK(a[0].pitch_type == PitchType::knuckle_curve);
  a = parse_segmented_annotations(R"([{"id":"c5","labels":["no_activity"]}])");
  CHECK_FALSE(a[0].has_activity());

  CHECK(annotation_error(R"([{"id":"c2","labels":["no_activity"],"pitch_speed":90}])") ==
        AnnotationErrorKind::pitch_without_activity);
  CHECK(annotation_error(R"([{"id":"c6","labels":["homerun"]}])") == AnnotationErrorKind::unknown_class);
  CHECK(annotation_error(R"([{"id":"c7","labels":["ball"]})") == AnnotationErrorKind::malformed_json);
  CHECK(annotation_error(R"([{"id":"c8","labels":["ball"],"pitch_type":"spitter"}])") ==
        AnnotationErrorKind::invalid_field);
  CHECK(annotation_error(R"([{"id":"c9"}])") == AnnotationErrorKind::invalid_field);
}

TEST_CASE("annotation serialization round trips") {
  std::vector<SegmentedAnnotation> records{
      {"a", {1, 0, 0, 0, 0, 0, 0, 0}, PitchType::slider, 88.5},
      {"b", {0, 0, 1, 1, 0, 1, 0, 0}, std::nullopt, std::nullopt},
      {"c", {0, 0, 0, 0, 0, 0, 0, 0}, std::nullopt, std::nullopt},
  };
  CHECK(parse_segmented_annotations(serialize_segmented_annotations(records)) == records);

  const std::vector<std::string> classes{"x", "y"};
  std::vector<ContinuousAnnotation> videos{{"v", 10, {{0, 1, 3}, {1, 3, 9}}}, {"w", 4, {}}};
  CHECK(parse_continuous_annotations(serialize_continuous_annotations(videos, classes), classes) == videos);
}

TEST_CASE("continuous annotations derive frame labels") {
  const std::vector<std::string> classes{"x", "y"};
  const auto v = parse_continuous_annotations(
      R"([{"id":"v","frames":5,"events":[{"label":"y","start":1,"end":2},{"label":"x","start":4,"end":4}]}])", classes);
  CHECK(v[0].frame_labels(2) == Tensor::matrix({{0, 0}, {0, 1}, {0, 1}, {0, 0}, {1, 0}}));
  CHECK_THROWS_AS(parse_continuous_annotations(
                      R"([{"id":"v","frames":5,"events":[{"label":"x","start":3,"end":5}]}])", classes),
                  AnnotationError);
  CHECK_THROWS_AS(parse_continuous_annotations(
                      R"([{"id":"v","frames":5,"events":[{"label":"x","start":3,"end":2}]}])", classes),
                  AnnotationError);
}

TEST_CASE("segmented generator: determinism, locality and golden bytes") {
  SyntheticSpec spec;
  spec.seed = 4;
  const auto a = generate_synthetic_segmented(spec, 20), b = generate_synthetic_segmented(spec, 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(encode_features(a[i].features) == encode_features(b[i].features));
    CHECK(a[i].labels == b[i].labels);
    const std::size_t T = a[i].features.frames();
    CHECK(T >= spec.t_min);
    CHECK(T <= spec.t_max);
    for (const auto& m : a[i].motifs) CHECK(m.end - m.start + 1 <= spec.motif_max);
  }
  // Clip i does not depend on how many clips are generated.
  const auto c = generate_segmented_clip(spec, make_world(spec), 7);
  CHECK(encode_features(c.features) == encode_features(a[7].features));

  const auto golden = tsk::test::golden_clip();
  CHECK(encode_features(golden.features) == slurp(tsk::test::golden_dir() / "synthetic_clip.tskf"));
}

TEST_CASE("segmented generator: noiseless oracle is perfect and marginals match") {
  SyntheticSpec spec;
  spec.noise = 0.0;
  spec.seed = 8;
  const auto world = make_world(spec);
  PredictionSet set{Tensor({300, spec.classes}), Tensor({300, spec.classes})};
  for (std::size_t i = 0; i < 300; ++i) {
    const auto clip = generate_segmented_clip(spec, world, i);
    const Tensor s = interval_oracle_scores(spec, world, clip.features.values);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      set.scores.at(i, c) = s[c];
      set.labels.at(i, c) = clip.labels[c];
    }
  }
  CHECK(clip_map(set).mean == 1.0);

  spec.noise = 1.0;
  const auto clips = generate_synthetic_segmented(spec, 1000);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    double rate = 0.0;
    for (const auto& clip : clips) rate += clip.labels[c];
    rate /= 1000.0;
    CHECK(std::abs(rate - spec.label_prob) <= 0.1 * spec.label_prob);
  }
}

TEST_CASE("class directions are orthonormal") {
  SyntheticSpec spec;
  const auto world = make_world(spec);
  for (std::size_t a = 0; a < spec.classes; ++a)
    for (std::size_t b = 0; b < spec.classes; ++b) {
      double dot = 0.0;
      for (std::size_t d = 0; d < spec.dim; ++d) dot += world.directions.at(a, d) * world.directions.at(b, d);
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0));
    }
}

TEST_CASE("continuous generator") {
  SyntheticSpec spec = task_preset(Task::detection);
  spec.seed = 2;
  const auto videos = generate_synthetic_continuous(spec, 500);
  double events = 0.0;
  for (const auto& v : videos) {
    events += static_cast<double>(v.annotation.events.size());
    const Tensor labels = v.annotation.frame_labels(spec.classes);
    std::vector<int> covered(v.annotation.frames, 0);
    for (const auto& e : v.annotation.events)
      for (std::size_t t = e.start; t <= e.end; ++t) ++covered[t];
    for (std::size_t t = 0; t < v.annotation.frames; ++t) {
      CHECK(covered[t] <= 1);
      double row = 0.0;
      for (std::size_t c = 0; c < spec.classes; ++c) row += labels.at(t, c);
      CHECK(row == static_cast<double>(covered[t]));
    }
    for (std::size_t e = 1; e < v.annotation.events.size(); ++e) {
      CHECK(v.annotation.events[e].start >= v.annotation.events[e - 1].end + 1 + spec.gap_min);
    }
  }
  CHECK(events / 500.0 == doctest::Approx(7.0).epsilon(0.05));

  spec.events_mean = 0;
  spec.events_spread = 0;
  spec.noise = 0.0;
  const auto empty = generate_continuous_video(spec, make_world(spec), 0);
  CHECK(empty.annotation.events.empty());
  for (double x : empty.features.values.data()) CHECK(x == 0.0);
  const Tensor no_labels = empty.annotation.frame_labels(spec.classes);
  for (double x : no_labels.data()) CHECK(x == 0.0);

  spec.events_mean = 20;
  CHECK_THROWS_AS(generate_continuous_video(spec, make_world(spec), 0), SpecError);
}

TEST_CASE("speed generator") {
  CHECK(speed_motif_duration(60, 10, 80) == 8);
  CHECK(speed_motif_duration(60, 10, 100) < speed_motif_duration(60, 10, 70));
  SyntheticSpec spec = task_preset(Task::speed);
  const auto world = make_world(spec);
  const auto clips = generate_synthetic_speed(spec, 400);
  std::vector<double> predicted, truth;
  for (const auto& c : clips) {
    CHECK(c.mph >= 70.0);
    CHECK(c.mph <= 100.0);
    predicted.push_back(speed_oracle(spec, world, c.features.values));
    truth.push_back(c.mph);
  }
  CHECK(speed_error(predicted, truth).mae < 2.0);
}

TEST_CASE("pitch generator covers the six pitch types") {
  SyntheticSpec spec = task_preset(Task::pitch_type);
  std::map<PitchType, int> counts;
  for (const auto& c : generate_synthetic_pitch(spec, 600)) ++counts[c.pitch];
  CHECK(counts.size() == 6);
  for (const auto& [type, n] : counts) CHECK(n > 60);
  spec.classes = 4;
  CHECK_THROWS_AS(generate_pitch_clip(spec, make_world(spec), 0), SpecError);
}

TEST_CASE("spec validation") {
  SyntheticSpec spec;
  spec.motif_max = 50;
  CHECK_THROWS_AS(spec.validate(), SpecError);
  spec = SyntheticSpec{};
  spec.t_min = 90;
  CHECK_THROWS_AS(spec.validate(), SpecError);
}

TEST_CASE("manifest and dataset loading") {
  const auto dir = tsk::test::scratch_dir("dataset");
  for (Task task : {Task::multilabel, Task::detection, Task::speed, Task::pitch_type}) {
    CAPTURE(to_string(task));
    SyntheticSpec spec = task_preset(task);
    spec.seed = 3;
    const auto out = dir / std::string(to_string(task));
    const Manifest m = write_synthetic_dataset(out, task, spec, 10);
    CHECK(read_manifest(out / "manifest.json") == m);
    const auto all = load_examples(out / "manifest.json");
    const auto train = load_examples(out / "manifest.json", "train");
    CHECK(all.size() == 10);
    CHECK(train.size() == 7);
    CHECK(all[0].features.dim(1) == spec.dim);
  }
  const auto speed = load_examples(dir / "speed" / "manifest.json");
  CHECK(speed[0].target.size() == 1);
  CHECK(speed[0].target[0] >= 70.0);
  CHECK_THROWS_AS(parse_manifest("{\"version\": 2}"), FormatError);
  CHECK_THROWS_AS(parse_manifest("not json"), FormatError);
}

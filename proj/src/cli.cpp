#include "tsk/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsk/checkpoint.hpp"
#include "tsk/dataset.hpp"
#include "tsk/filters.hpp"
#include "tsk/metrics.hpp"
#include "tsk/training.hpp"

namespace tsk {

namespace fs = std::filesystem;

namespace {

/// Thrown for missing inputs and unwritable outputs (exit 1).
struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t default_threads() {
  if (const char* env = std::getenv("TSK_THREADS")) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return n;
  }
  return 1;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw IoFailure(std::string(what) + " not found: " + path.string());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write " + path.string());
  return out;
}

// ---------------------------------------------------------------------------

struct SynthFlags {
  std::string task = "multilabel";
  fs::path out;
  std::size_t count = 200;
  std::uint64_t seed = 0;
  bool force = false;
  std::optional<std::size_t> classes, dim, t_min, t_max, motif_min, motif_max, events, events_spread;
  std::optional<double> amplitude, noise, fps, label_prob, hard_negatives;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  const Task task = parse_task(f.task);
  if (fs::exists(f.out) && !fs::is_empty(f.out) && !f.force) {
    throw ConfigError("output directory " + f.out.string() + " is not empty (use --force to overwrite)");
  }
  SyntheticSpec spec = task_preset(task);
  spec.seed = f.seed;
  if (f.classes) spec.classes = *f.classes;
  if (f.dim) spec.dim = *f.dim;
  if (f.t_min) spec.t_min = *f.t_min;
  if (f.t_max) spec.t_max = *f.t_max;
  if (f.t_min && !f.t_max) spec.t_max = std::max(spec.t_max, spec.t_min);
  if (f.motif_min) spec.motif_min = *f.motif_min;
  if (f.motif_max) spec.motif_max = *f.motif_max;
  if (f.events) spec.events_mean = *f.events;
  if (f.events_spread) spec.events_spread = *f.events_spread;
  if (f.events && !f.events_spread) spec.events_spread = std::min(spec.events_spread, spec.events_mean);
  if (f.amplitude) spec.amplitude = *f.amplitude;
  if (f.noise) spec.noise = *f.noise;
  if (f.fps) spec.fps = *f.fps;
  if (f.label_prob) spec.label_prob = *f.label_prob;
  if (f.hard_negatives) spec.hard_negative_prob = *f.hard_negatives;
  spec.validate();

  const Manifest manifest = write_synthetic_dataset(f.out, task, spec, f.count);
  const auto train = std::count_if(manifest.entries.begin(), manifest.entries.end(),
                                   [](const ManifestEntry& e) { return e.split == "train"; });
  out << "wrote " << manifest.entries.size() << " " << to_string(task) << " items (" << train << " train, "
      << manifest.entries.size() - static_cast<std::size_t>(train) << " test) to " << f.out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct HeadFlags {
  std::size_t window = 16, kernel = 8, sub_filters = 3, gaussians = 3, super_filters = 3, hidden = 512;
  std::vector<std::size_t> levels;

  void apply(HeadConfig& config) const {
    config.window = window;
    config.kernel = kernel;
    config.sub_filters = sub_filters;
    config.gaussians = gaussians;
    config.super_filters = super_filters;
    config.hidden = hidden;
    config.pyramid_levels = levels;
  }
};

void add_head_flags(CLI::App* cmd, HeadFlags& h) {
  cmd->add_option("--window", h.window, "Sliding window / continuous sub-event filter length")->capture_default_str();
  cmd->add_option("--kernel", h.kernel, "Temporal convolution kernel length")->capture_default_str();
  cmd->add_option("--sub-filters", h.sub_filters, "Sub-event filters M")->capture_default_str();
  cmd->add_option("--gaussians", h.gaussians, "Gaussians per sub-event filter N")->capture_default_str();
  cmd->add_option("--super-filters", h.super_filters, "Super-event Cauchy filters")->capture_default_str();
  cmd->add_option("--hidden", h.hidden, "bi-LSTM hidden units")->capture_default_str();
  cmd->add_option("--levels", h.levels, "Pyramid divisors (default 1 2 4 segmented, 2 4 8 continuous)");
}

struct TrainFlags {
  fs::path manifest, out;
  std::string head;
  std::string task;
  HeadFlags head_flags;
  TrainConfig train;
  std::size_t threads = 0;
  bool quiet = false;
};

std::vector<Example> load_split(const fs::path& manifest, const std::string& split) {
  require_file(manifest, "manifest");
  return load_examples(manifest, split);
}

int cmd_train(TrainFlags f, std::ostream& out) {
  require_file(f.manifest, "manifest");
  const Manifest manifest = read_manifest(f.manifest);
  const Task task = f.task.empty() ? manifest.task : parse_task(f.task);
  if (task != manifest.task) {
    throw ConfigError("--task " + f.task + " does not match the manifest task " + std::string(to_string(manifest.task)));
  }
  HeadConfig config;
  config.kind = parse_head_kind(f.head);
  config.mode = task_mode(task);
  config.num_classes = task == Task::speed ? 1 : manifest.classes.size();
  f.head_flags.apply(config);
  if (!supports(config.mode, config.kind)) check_task(task, config);  // fail before loading data

  const std::vector<Example> train_set = load_examples(f.manifest, "train");
  const std::vector<Example> eval_set = load_examples(f.manifest, "test");
  if (train_set.empty()) throw ConfigError("manifest has no training entries");
  config.feature_dim = train_set.front().features.dim(1);
  check_task(task, config);

  f.train.threads = f.threads ? f.threads : default_threads();
  f.train.validate();
  Model model = Model::create(config, f.train.seed);
  const TrainResult result = train(model, task, train_set, eval_set, f.train, [&](const EpochRecord& r) {
    if (!f.quiet) {
      out << "epoch " << r.epoch << " lr " << r.learning_rate << " loss " << r.train_loss << " metric "
          << r.eval_metric << "\n";
    }
  });

  fs::create_directories(f.out);
  save_checkpoint(f.out / "model.tskm", Checkpoint{model, std::string(to_string(task))});
  auto history = open_output(f.out / "history.csv");
  write_history_csv(history, result.history);
  out << "trained " << to_string(config.kind) << " (" << model.parameter_count() << " parameters) for "
      << result.history.size() << " epochs; checkpoint " << (f.out / "model.tskm").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalFlags {
  fs::path checkpoint, manifest, out;
  std::string split = "test";
  std::size_t threads = 0;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  require_file(f.checkpoint, "checkpoint");
  require_file(f.manifest, "manifest");
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const Manifest manifest = read_manifest(f.manifest);
  if (!ckpt.task.empty() && parse_task(ckpt.task) != manifest.task) {
    throw ConfigError("checkpoint was trained for task '" + ckpt.task + "' but the manifest is '" +
                      std::string(to_string(manifest.task)) + "'");
  }
  const Task task = manifest.task;
  const HeadConfig& config = ckpt.model.config();
  check_task(task, config);
  const std::size_t expected_classes = task == Task::speed ? 1 : manifest.classes.size();
  if (config.num_classes != expected_classes) {
    throw ConfigError("checkpoint has " + std::to_string(config.num_classes) + " outputs, manifest has " +
                      std::to_string(expected_classes) + " classes");
  }
  const std::vector<Example> examples = load_split(f.manifest, f.split);
  if (examples.empty()) throw ConfigError("split '" + f.split + "' is empty");
  if (examples.front().features.dim(1) != config.feature_dim) {
    throw ConfigError("feature dimension " + std::to_string(examples.front().features.dim(1)) +
                      " does not match the checkpoint's " + std::to_string(config.feature_dim));
  }
  const std::size_t threads = f.threads ? f.threads : default_threads();
  const std::vector<Tensor> outputs = predict_all(ckpt.model, examples, threads);

  nlohmann::json report{{"task", to_string(task)}, {"split", f.split}, {"examples", examples.size()}};
  std::optional<MapResult> map;
  if (task == Task::multilabel) {
    PredictionSet set{Tensor({examples.size(), config.num_classes}), Tensor({examples.size(), config.num_classes})};
    for (std::size_t i = 0; i < examples.size(); ++i) {
      std::copy(outputs[i].data().begin(), outputs[i].data().end(), set.scores.row(i).begin());
      std::copy(examples[i].target.data().begin(), examples[i].target.data().end(), set.labels.row(i).begin());
    }
    map = clip_map(set);
  } else if (task == Task::detection) {
    std::vector<PredictionSet> videos;
    for (std::size_t i = 0; i < examples.size(); ++i) videos.push_back({outputs[i], examples[i].target});
    map = per_frame_map(videos);
  } else if (task == Task::speed) {
    std::vector<double> predicted, truth;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      predicted.push_back(outputs[i][0]);
      truth.push_back(examples[i].target[0]);
    }
    const SpeedError e = speed_error(predicted, truth);
    report["mae"] = e.mae;
    report["rmse"] = e.rmse;
  } else {
    std::vector<std::size_t> predicted, truth;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto scores = outputs[i].data();
      predicted.push_back(static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin()));
      truth.push_back(static_cast<std::size_t>(examples[i].target[0]));
    }
    report["accuracy"] = accuracy(predicted, truth);
  }
  if (map) report.update(map_report(*map, manifest.classes));

  const std::string text = report.dump(2) + "\n";
  out << text;
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    open_output(f.out / "metrics.json") << text;
    if (map) {
      const ApTableRow row{std::string(to_string(config.kind)), *map};
      auto table = open_output(f.out / "ap.csv");
      write_ap_table_csv(table, manifest.classes, std::span(&row, 1));
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ParamsFlags {
  std::size_t d = 2048, c = 8;
  std::vector<std::string> heads;
  std::string mode;
  HeadFlags head_flags;
};

std::string abbreviate(std::size_t n) {
  std::ostringstream s;
  if (n >= 1'000'000) {
    s << std::fixed << std::setprecision(1) << static_cast<double>(n) / 1e6 << "M";
  } else if (n >= 1'000) {
    s << static_cast<std::size_t>(std::lround(static_cast<double>(n) / 1e3)) << "K";
  } else {
    s << n;
  }
  return s.str();
}

int cmd_params(const ParamsFlags& f, std::ostream& out) {
  std::vector<HeadKind> kinds;
  for (const auto& h : f.heads) kinds.push_back(parse_head_kind(h));
  if (kinds.empty()) kinds = all_head_kinds();
  out << "head,mode,aggregation,classifier,total,approx\n";
  for (HeadKind kind : kinds) {
    HeadConfig config;
    config.kind = kind;
    config.feature_dim = f.d;
    config.num_classes = f.c;
    f.head_flags.apply(config);
    config.mode = !f.mode.empty() ? parse_mode(f.mode)
                                  : (supports(Mode::segmented, kind) ? Mode::segmented : Mode::continuous);
    config.validate();
    const ParameterCount count = count_parameters(config);
    out << to_string(kind) << ',' << to_string(config.mode) << ',' << count.aggregation << ',' << count.classifier
        << ',' << count.total() << ',' << abbreviate(count.total()) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectFlags {
  fs::path checkpoint, out;
  std::size_t length = 0;
};

int cmd_inspect_filters(const InspectFlags& f, std::ostream& out) {
  require_file(f.checkpoint, "checkpoint");
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const Model& model = ckpt.model;
  const HeadConfig& config = model.config();
  const bool has_sub = model.has_parameter("sub.center"), has_super = model.has_parameter("super.center");
  if (!has_sub && !has_super) {
    throw ConfigError("head '" + std::string(to_string(config.kind)) + "' has no temporal filters to inspect");
  }
  std::size_t sub_length = f.length, super_length = f.length;
  if (sub_length == 0) sub_length = config.mode == Mode::continuous ? config.window : 64;
  if (super_length == 0) super_length = 64;

  std::ostringstream csv;
  csv << std::setprecision(17);
  const std::size_t width = std::max(has_sub ? sub_length : 0, has_super ? super_length : 0);
  csv << "bank,filter_index,gaussian_index";
  for (std::size_t t = 0; t < width; ++t) csv << ",w_" << t;
  csv << "\n";
  if (has_sub) {
    const SubEventFilterBank bank{config.gaussians, model.parameter("sub.center"), model.parameter("sub.stride"),
                                  model.parameter("sub.width")};
    const Tensor filters = gaussian_filters(bank, sub_length);  // [M x N x L]
    for (std::size_t m = 0; m < filters.dim(0); ++m) {
      for (std::size_t n = 0; n < filters.dim(1); ++n) {
        csv << "sub," << m << ',' << n;
        for (std::size_t t = 0; t < width; ++t) {
          csv << ',';
          if (t < sub_length) csv << filters.at(m, n, t);
        }
        csv << "\n";
      }
    }
  }
  if (has_super) {
    const SuperEventFilterBank bank{model.parameter("super.center"), model.parameter("super.width"),
                                    model.parameter("super.attention")};
    const Tensor filters = cauchy_filters(bank, super_length);  // [T x M]
    for (std::size_t m = 0; m < filters.dim(1); ++m) {
      csv << "super," << m << ',';
      for (std::size_t t = 0; t < width; ++t) {
        csv << ',';
        if (t < super_length) csv << filters.at(t, m);
      }
      csv << "\n";
    }
  }
  if (f.out.empty()) {
    out << csv.str();
  } else {
    open_output(f.out) << csv.str();
    out << "wrote filters of " << to_string(config.kind) << " to " << f.out.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal feature aggregation heads for activity recognition", "tsk"};
  app.require_subcommand(1);

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic planted-motif dataset");
  synth_cmd->add_option("--task", synth.task, "multilabel | detection | speed | pitch_type")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--clips,--count", synth.count, "Number of clips or videos")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
  synth_cmd->add_flag("--force", synth.force, "Write into a non-empty directory");
  synth_cmd->add_option("--classes", synth.classes);
  synth_cmd->add_option("--dim", synth.dim);
  synth_cmd->add_option("--t-min", synth.t_min);
  synth_cmd->add_option("--t-max", synth.t_max);
  synth_cmd->add_option("--motif-min", synth.motif_min);
  synth_cmd->add_option("--motif-max", synth.motif_max);
  synth_cmd->add_option("--events", synth.events, "Mean events per continuous video");
  synth_cmd->add_option("--events-spread", synth.events_spread);
  synth_cmd->add_option("--amplitude", synth.amplitude);
  synth_cmd->add_option("--noise", synth.noise);
  synth_cmd->add_option("--fps", synth.fps);
  synth_cmd->add_option("--label-prob", synth.label_prob);
  synth_cmd->add_option("--hard-negatives", synth.hard_negatives, "Chance an absent class leaks a diffuse copy");

  TrainFlags trainf;
  auto* train_cmd = app.add_subcommand("train", "Train a head on a dataset manifest");
  train_cmd->add_option("--manifest", trainf.manifest)->required();
  train_cmd->add_option("--head", trainf.head, "Head kind")->required();
  train_cmd->add_option("--task", trainf.task, "Task (defaults to the manifest's)");
  train_cmd->add_option("--out", trainf.out, "Output directory")->required();
  train_cmd->add_option("--epochs", trainf.train.epochs)->capture_default_str();
  train_cmd->add_option("--lr", trainf.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--decay", trainf.train.decay_factor)->capture_default_str();
  train_cmd->add_option("--decay-every", trainf.train.decay_every)->capture_default_str();
  train_cmd->add_option("--batch", trainf.train.batch_size)->capture_default_str();
  train_cmd->add_option("--seed", trainf.train.seed)->capture_default_str();
  train_cmd->add_option("--threads", trainf.threads, "Worker threads (default TSK_THREADS or 1)");
  train_cmd->add_flag("--quiet", trainf.quiet, "Do not print per-epoch lines");
  add_head_flags(train_cmd, trainf.head_flags);

  EvalFlags evalf;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", evalf.checkpoint)->required();
  eval_cmd->add_option("--manifest", evalf.manifest)->required();
  eval_cmd->add_option("--split", evalf.split)->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
  eval_cmd->add_option("--out", evalf.out, "Directory for metrics.json and ap.csv");
  eval_cmd->add_option("--threads", evalf.threads);

  ParamsFlags paramsf;
  auto* params_cmd = app.add_subcommand("params", "Count head parameters");
  params_cmd->add_option("--d", paramsf.d, "Feature dimension")->capture_default_str();
  params_cmd->add_option("--c", paramsf.c, "Classes")->capture_default_str();
  params_cmd->add_option("--head", paramsf.heads, "Head kinds (default: all)");
  params_cmd->add_option("--mode", paramsf.mode, "segmented | continuous");
  add_head_flags(params_cmd, paramsf.head_flags);

  InspectFlags inspectf;
  auto* inspect_cmd = app.add_subcommand("inspect-filters", "Export materialized temporal filters as CSV");
  inspect_cmd->add_option("--checkpoint", inspectf.checkpoint)->required();
  inspect_cmd->add_option("--length", inspectf.length, "Filter length T (default: window or 64)");
  inspect_cmd->add_option("--out", inspectf.out, "CSV path (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*train_cmd) return cmd_train(trainf, out);
    if (*eval_cmd) return cmd_eval(evalf, out);
    if (*params_cmd) return cmd_params(paramsf, out);
    if (*inspect_cmd) return cmd_inspect_filters(inspectf, out);
  } catch (const IoFailure& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const AnnotationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    // ConfigError, SpecError, ShapeError, MetricError
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace tsk

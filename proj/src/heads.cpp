#include "tsk/heads.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "tsk/filters.hpp"
#include "tsk/random.hpp"

namespace tsk {

namespace {

struct KindName {
  HeadKind kind;
  std::string_view name;
};

constexpr std::array<KindName, 9> kKindNames{{
    {HeadKind::mean_pool, "mean_pool"},
    {HeadKind::max_pool, "max_pool"},
    {HeadKind::pyramid, "pyramid"},
    {HeadKind::temporal_conv, "temporal_conv"},
    {HeadKind::sub_events, "sub_events"},
    {HeadKind::bilstm, "bilstm"},
    {HeadKind::per_frame, "per_frame"},
    {HeadKind::super_events, "super_events"},
    {HeadKind::sub_super, "sub_super"},
}};

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::segmented ? "segmented" : "continuous"; }

std::string_view to_string(HeadKind kind) {
  for (const auto& entry : kKindNames) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  if (text == "segmented") return Mode::segmented;
  if (text == "continuous") return Mode::continuous;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

HeadKind parse_head_kind(std::string_view text) {
  for (const auto& entry : kKindNames) {
    if (entry.name == text) return entry.kind;
  }
  throw ConfigError("unknown head '" + std::string(text) + "'");
}

const std::vector<HeadKind>& all_head_kinds() {
  static const std::vector<HeadKind> kinds = [] {
    std::vector<HeadKind> out;
    for (const auto& entry : kKindNames) out.push_back(entry.kind);
    return out;
  }();
  return kinds;
}

bool supports(Mode mode, HeadKind kind) {
  switch (kind) {
    case HeadKind::mean_pool:
    case HeadKind::bilstm:
      return mode == Mode::segmented;
    case HeadKind::per_frame:
    case HeadKind::super_events:
    case HeadKind::sub_super:
      return mode == Mode::continuous;
    default:
      return true;
  }
}

std::vector<std::size_t> HeadConfig::levels() const {
  if (!pyramid_levels.empty()) return pyramid_levels;
  return mode == Mode::segmented ? std::vector<std::size_t>{1, 2, 4} : std::vector<std::size_t>{2, 4, 8};
}

void HeadConfig::validate() const {
  if (!supports(mode, kind)) {
    throw ConfigError("head '" + std::string(to_string(kind)) + "' is not available in " +
                      std::string(to_string(mode)) + " mode");
  }
  if (feature_dim == 0) throw ConfigError("feature dimension must be >= 1");
  if (num_classes == 0) throw ConfigError("class count must be >= 1");
  if (window == 0 || kernel == 0) throw ConfigError("window and kernel lengths must be >= 1");
  if (hidden == 0) throw ConfigError("hidden size must be >= 1");
  if (sub_filters == 0 || super_filters == 0) throw ConfigError("filter counts must be >= 1");
  if (gaussians < 2) throw ConfigError("sub-event filters need at least 2 Gaussians");
  if (!(output_scale > 0.0) || !std::isfinite(output_offset)) throw ConfigError("invalid output affine map");
  for (std::size_t level : levels()) {
    if (level == 0) throw ConfigError("pyramid levels must be >= 1");
  }
  if (mode == Mode::continuous && kind == HeadKind::pyramid) {
    const auto lv = levels();
    if (*std::max_element(lv.begin(), lv.end()) > window) {
      throw ConfigError("pyramid level exceeds window length " + std::to_string(window));
    }
  }
}

std::vector<FrameRange> split_evenly(std::size_t frames, std::size_t parts) {
  if (parts == 0 || parts > frames) {
    throw ShapeError("cannot split " + std::to_string(frames) + " frames into " + std::to_string(parts) + " parts");
  }
  std::vector<FrameRange> out;
  out.reserve(parts);
  const std::size_t base = frames / parts, extra = frames % parts;
  std::size_t first = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out.push_back({first, first + len - 1});
    first += len;
  }
  return out;
}

Var pyramid_pool(Var v, std::span<const std::size_t> levels) {
  const std::size_t frames = v.value().dim(0);
  std::vector<FrameRange> ranges;
  for (std::size_t level : levels) {
    if (level > frames) {
      throw ShapeError("pyramid_pool: level " + std::to_string(level) + " needs at least " + std::to_string(level) +
                       " frames, got " + std::to_string(frames));
    }
    const auto parts = split_evenly(frames, level);
    ranges.insert(ranges.end(), parts.begin(), parts.end());
  }
  return range_max(v, ranges);
}

namespace {

/// Clamp a half-open virtual range [lo, hi) of a padded sequence to the
/// real frames it replicates.
FrameRange clamp_range(std::ptrdiff_t lo, std::ptrdiff_t hi, std::size_t frames) {
  const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
  return {static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(lo, 0, last)),
          static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(hi - 1, 0, last))};
}

}  // namespace

Var sliding_max_pool(Var v, std::size_t window) {
  const std::size_t frames = v.value().dim(0);
  if (window == 0 || window > frames) {
    throw ShapeError("sliding_max_pool: window " + std::to_string(window) + " exceeds sequence length " +
                     std::to_string(frames));
  }
  std::vector<FrameRange> ranges;
  ranges.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = window_start(static_cast<std::ptrdiff_t>(t), window);
    ranges.push_back(clamp_range(start, start + static_cast<std::ptrdiff_t>(window), frames));
  }
  return range_max(v, ranges);
}

Var sliding_pyramid_pool(Var v, std::size_t window, std::span<const std::size_t> levels) {
  const std::size_t frames = v.value().dim(0), dim = v.value().dim(1);
  if (window == 0 || window > frames) {
    throw ShapeError("sliding_pyramid_pool: window " + std::to_string(window) + " exceeds sequence length " +
                     std::to_string(frames));
  }
  std::vector<FrameRange> segments;
  for (std::size_t level : levels) {
    const auto parts = split_evenly(window, level);
    segments.insert(segments.end(), parts.begin(), parts.end());
  }
  std::vector<FrameRange> ranges;
  ranges.reserve(frames * segments.size());
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = window_start(static_cast<std::ptrdiff_t>(t), window);
    for (const FrameRange& s : segments) {
      ranges.push_back(clamp_range(start + static_cast<std::ptrdiff_t>(s.first),
                                   start + static_cast<std::ptrdiff_t>(s.last) + 1, frames));
    }
  }
  return reshape(range_max(v, ranges), {frames, segments.size() * dim});
}

// ---------------------------------------------------------------------------
// Parameter layout

namespace {

std::size_t classifier_inputs(const HeadConfig& c) {
  const std::size_t d = c.feature_dim;
  std::size_t pyramid_rows = 0;
  for (std::size_t level : c.levels()) pyramid_rows += level;
  switch (c.kind) {
    case HeadKind::mean_pool:
    case HeadKind::max_pool:
    case HeadKind::per_frame:
    case HeadKind::temporal_conv:
      return d;
    case HeadKind::pyramid:
      return pyramid_rows * d;
    case HeadKind::sub_events:
      return c.sub_filters * c.gaussians * d;
    case HeadKind::bilstm:
      return 2 * c.hidden;
    case HeadKind::super_events:
      return d + c.num_classes * d;
    case HeadKind::sub_super:
      return c.sub_filters * c.gaussians * d + c.num_classes * d;
  }
  return 0;
}

bool uses_sub_events(HeadKind kind) { return kind == HeadKind::sub_events || kind == HeadKind::sub_super; }
bool uses_super_events(HeadKind kind) { return kind == HeadKind::super_events || kind == HeadKind::sub_super; }

struct ParameterSpec {
  std::string name;
  Shape shape;
};

std::vector<ParameterSpec> layout(const HeadConfig& c) {
  const std::size_t d = c.feature_dim, classes = c.num_classes;
  std::vector<ParameterSpec> specs;
  if (c.kind == HeadKind::temporal_conv) {
    specs.push_back({"conv.kernel", {c.kernel, d, d}});
    specs.push_back({"conv.bias", {d}});
  }
  if (uses_sub_events(c.kind)) {
    specs.push_back({"sub.center", {c.sub_filters}});
    specs.push_back({"sub.stride", {c.sub_filters}});
    specs.push_back({"sub.width", {c.sub_filters}});
  }
  if (uses_super_events(c.kind)) {
    specs.push_back({"super.center", {c.super_filters}});
    specs.push_back({"super.width", {c.super_filters}});
    specs.push_back({"super.attention", {classes, c.super_filters}});
  }
  if (c.kind == HeadKind::bilstm) {
    for (const char* dir : {"lstm.forward", "lstm.backward"}) {
      specs.push_back({std::string(dir) + ".w_ih", {d, 4 * c.hidden}});
      specs.push_back({std::string(dir) + ".w_hh", {c.hidden, 4 * c.hidden}});
      specs.push_back({std::string(dir) + ".bias", {4 * c.hidden}});
    }
  }
  specs.push_back({"classifier.weight", {classifier_inputs(c), classes}});
  specs.push_back({"classifier.bias", {classes}});
  return specs;
}

}  // namespace

ParameterCount count_parameters(const HeadConfig& c) {
  c.validate();
  const std::size_t d = c.feature_dim, classes = c.num_classes;
  ParameterCount count;
  count.classifier = classifier_inputs(c) * classes + classes;
  switch (c.kind) {
    case HeadKind::temporal_conv:
      count.aggregation = c.kernel * d * d + d;
      break;
    case HeadKind::sub_events:
      count.aggregation = 3 * c.sub_filters;
      break;
    case HeadKind::super_events:
      count.aggregation = 2 * c.super_filters + classes * c.super_filters;
      break;
    case HeadKind::sub_super:
      count.aggregation = 3 * c.sub_filters + 2 * c.super_filters + classes * c.super_filters;
      break;
    case HeadKind::bilstm:
      count.aggregation = 2 * (4 * c.hidden * (d + c.hidden) + 4 * c.hidden);
      break;
    default:
      break;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Model

Var BoundParameters::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return vars_[i];
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Model Model::create(const HeadConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(mix_seed(seed, 0));
  Model model;
  model.config_ = config;
  const auto specs = layout(config);
  for (const auto& spec : specs) model.parameters_.push_back({spec.name, Tensor(spec.shape)});

  if (uses_sub_events(config.kind)) {
    auto bank = SubEventFilterBank::initialize(config.sub_filters, config.gaussians, rng);
    model.parameter("sub.center") = bank.center;
    model.parameter("sub.stride") = bank.stride;
    model.parameter("sub.width") = bank.width;
  }
  if (uses_super_events(config.kind)) {
    auto bank = SuperEventFilterBank::initialize(config.super_filters, config.num_classes, rng);
    model.parameter("super.center") = bank.center;
    model.parameter("super.width") = bank.width;
    model.parameter("super.attention") = bank.attention;
  }
  auto fill_uniform = [&rng](Tensor& t, double bound) {
    for (double& x : t.data()) x = uniform(rng, -bound, bound);
  };
  for (auto& p : model.parameters_) {
    if (p.name == "conv.kernel") {
      fill_uniform(p.value, 1.0 / std::sqrt(static_cast<double>(config.kernel * config.feature_dim)));
    } else if (p.name.ends_with(".w_ih") || p.name.ends_with(".w_hh")) {
      fill_uniform(p.value, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
    } else if (p.name == "classifier.weight") {
      fill_uniform(p.value, 1.0 / std::sqrt(static_cast<double>(p.value.dim(0))));
    }
  }
  return model;
}

Model Model::from_parameters(const HeadConfig& config, std::vector<NamedTensor> parameters) {
  config.validate();
  const auto specs = layout(config);
  if (specs.size() != parameters.size()) {
    throw ConfigError("expected " + std::to_string(specs.size()) + " parameter tensors for head '" +
                      std::string(to_string(config.kind)) + "', got " + std::to_string(parameters.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name != parameters[i].name || specs[i].shape != parameters[i].value.shape()) {
      throw ConfigError("parameter '" + parameters[i].name + "' " + to_string(parameters[i].value.shape()) +
                        " does not match expected '" + specs[i].name + "' " + to_string(specs[i].shape));
    }
  }
  Model model;
  model.config_ = config;
  model.parameters_ = std::move(parameters);
  return model;
}

const Tensor& Model::parameter(std::string_view name) const {
  for (const auto& p : parameters_) {
    if (p.name == name) return p.value;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Tensor& Model::parameter(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).parameter(name));
}

bool Model::has_parameter(std::string_view name) const {
  return std::any_of(parameters_.begin(), parameters_.end(), [&](const auto& p) { return p.name == name; });
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters_) n += p.value.size();
  return n;
}

BoundParameters Model::bind(Tape& tape, bool trainable) const {
  BoundParameters bound;
  for (const auto& p : parameters_) {
    bound.names_.push_back(p.name);
    bound.vars_.push_back(trainable ? tape.parameter(p.value) : tape.constant(p.value));
  }
  return bound;
}

void Model::set_output_affine(double offset, double scale) {
  HeadConfig next = config_;
  next.output_offset = offset;
  next.output_scale = scale;
  next.validate();
  config_ = next;
}

// ---------------------------------------------------------------------------
// Forward passes

std::size_t minimum_length(const HeadConfig& c) {
  if (c.mode == Mode::segmented) {
    if (c.kind == HeadKind::pyramid) {
      const auto lv = c.levels();
      return *std::max_element(lv.begin(), lv.end());
    }
    if (c.kind == HeadKind::temporal_conv) return c.kernel;
    return 1;
  }
  switch (c.kind) {
    case HeadKind::max_pool:
    case HeadKind::pyramid:
    case HeadKind::sub_events:
    case HeadKind::sub_super:
      return c.window;
    case HeadKind::temporal_conv:
      return c.kernel;
    default:
      return 1;
  }
}

namespace {

void check_input(const HeadConfig& c, Var v) {
  if (v.value().rank() != 2 || v.value().dim(1) != c.feature_dim) {
    throw ShapeError("head expects features [T x " + std::to_string(c.feature_dim) + "], got " + to_string(v.shape()));
  }
  const std::size_t need = minimum_length(c);
  if (v.value().dim(0) < need) {
    throw ShapeError(std::string(to_string(c.kind)) + " head needs at least " + std::to_string(need) +
                     " frames, got " + std::to_string(v.value().dim(0)));
  }
}

Var conv_with_bias(const BoundParameters& p, Var v, Padding padding) {
  Var conv = conv1d_temporal(v, p["conv.kernel"], padding);
  return add(conv, tile_rows(p["conv.bias"], conv.value().dim(0)));
}

Var sub_event_filters(const HeadConfig& c, const BoundParameters& p, std::size_t length) {
  return gaussian_filters(p["sub.center"], p["sub.stride"], p["sub.width"], c.gaussians, length);
}

/// Class-stacked super-event summary tiled across frames: [T x (C D)].
Var super_event_context(const HeadConfig& c, const BoundParameters& p, Var v) {
  const std::size_t frames = v.value().dim(0);
  Var filters = cauchy_filters(p["super.center"], p["super.width"], frames);
  Var summary = super_event_representation(filters, softmax_rows(p["super.attention"]), v);
  return tile_rows(reshape(summary, {c.num_classes * c.feature_dim}), frames);
}

Var lstm_direction(const BoundParameters& p, const std::string& prefix, Var v, std::size_t hidden, bool reverse) {
  const std::size_t frames = v.value().dim(0);
  Var input_proj = matmul(v, p[prefix + ".w_ih"]);
  Var w_hh = p[prefix + ".w_hh"];
  Var bias = p[prefix + ".bias"];
  Var h, c;
  for (std::size_t step = 0; step < frames; ++step) {
    const std::size_t t = reverse ? frames - 1 - step : step;
    Var gates = add(row(input_proj, t), bias);
    if (h.valid()) gates = add(gates, reshape(matmul(reshape(h, {1, hidden}), w_hh), {4 * hidden}));
    Var in_gate = sigmoid(slice(gates, 0, hidden));
    Var forget_gate = sigmoid(slice(gates, hidden, hidden));
    Var cell_in = tanh(slice(gates, 2 * hidden, hidden));
    Var out_gate = sigmoid(slice(gates, 3 * hidden, hidden));
    c = c.valid() ? add(mul(forget_gate, c), mul(in_gate, cell_in)) : mul(in_gate, cell_in);
    h = mul(out_gate, tanh(c));
  }
  return h;
}

}  // namespace

Var bilstm_forward(const BoundParameters& params, Var v, std::size_t hidden) {
  if (v.value().dim(0) == 0) throw ShapeError("bilstm_forward: empty sequence");
  const std::array<Var, 2> finals{lstm_direction(params, "lstm.forward", v, hidden, false),
                                  lstm_direction(params, "lstm.backward", v, hidden, true)};
  return concat(finals);
}

Var forward_segmented(const Model& model, const BoundParameters& p, Var v) {
  const HeadConfig& c = model.config();
  if (c.mode != Mode::segmented) throw ConfigError("forward_segmented called on a continuous head");
  check_input(c, v);
  const std::size_t frames = v.value().dim(0), d = c.feature_dim;
  Var features;
  switch (c.kind) {
    case HeadKind::mean_pool:
      features = pool_time(v, PoolKind::mean);
      break;
    case HeadKind::max_pool:
      features = pool_time(v, PoolKind::max);
      break;
    case HeadKind::pyramid: {
      const auto lv = c.levels();
      Var pooled = pyramid_pool(v, lv);
      features = reshape(pooled, {pooled.value().dim(0) * d});
      break;
    }
    case HeadKind::temporal_conv:
      features = pool_time(conv_with_bias(p, v, Padding::valid), PoolKind::max);
      break;
    case HeadKind::sub_events: {
      Var pooled = apply_subevents_segmented(sub_event_filters(c, p, frames), v);
      features = reshape(pooled, {pooled.value().size()});
      break;
    }
    case HeadKind::bilstm:
      features = bilstm_forward(p, v, c.hidden);
      break;
    default:
      throw ConfigError("head '" + std::string(to_string(c.kind)) + "' is not a segmented head");
  }
  return linear(features, p["classifier.weight"], p["classifier.bias"]);
}

Var forward_continuous(const Model& model, const BoundParameters& p, Var v) {
  const HeadConfig& c = model.config();
  if (c.mode != Mode::continuous) throw ConfigError("forward_continuous called on a segmented head");
  check_input(c, v);
  Var features;
  switch (c.kind) {
    case HeadKind::per_frame:
      features = v;
      break;
    case HeadKind::max_pool:
      features = sliding_max_pool(v, c.window);
      break;
    case HeadKind::pyramid: {
      const auto lv = c.levels();
      features = sliding_pyramid_pool(v, c.window, lv);
      break;
    }
    case HeadKind::temporal_conv:
      features = conv_with_bias(p, v, Padding::same_replicate);
      break;
    case HeadKind::sub_events:
      features = apply_subevents_continuous(sub_event_filters(c, p, c.window), v);
      break;
    case HeadKind::super_events:
      features = concat_columns(v, super_event_context(c, p, v));
      break;
    case HeadKind::sub_super:
      features = concat_columns(apply_subevents_continuous(sub_event_filters(c, p, c.window), v),
                                super_event_context(c, p, v));
      break;
    default:
      throw ConfigError("head '" + std::string(to_string(c.kind)) + "' is not a continuous head");
  }
  return linear(features, p["classifier.weight"], p["classifier.bias"]);
}

Var forward(const Model& model, const BoundParameters& params, Var v) {
  return model.config().mode == Mode::segmented ? forward_segmented(model, params, v)
                                                : forward_continuous(model, params, v);
}

Tensor predict(const Model& model, const Tensor& features) {
  Tape tape;
  BoundParameters params = model.bind(tape, false);
  Tensor out = forward(model, params, tape.constant(features)).value();
  const HeadConfig& c = model.config();
  if (c.output_offset != 0.0 || c.output_scale != 1.0) {
    for (double& x : out.data()) x = c.output_offset + c.output_scale * x;
  }
  return out;
}

}  // namespace tsk

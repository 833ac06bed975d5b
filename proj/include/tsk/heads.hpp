#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsk/autodiff.hpp"
#include "tsk/tensor.hpp"

namespace tsk {

enum class Mode { segmented, continuous };

enum class HeadKind {
  mean_pool,
  max_pool,
  pyramid,
  temporal_conv,
  sub_events,
  bilstm,
  per_frame,
  super_events,
  sub_super,
};

std::string_view to_string(Mode mode);
std::string_view to_string(HeadKind kind);
Mode parse_mode(std::string_view text);
HeadKind parse_head_kind(std::string_view text);
const std::vector<HeadKind>& all_head_kinds();

/// Invalid head configuration or a head used in the wrong mode.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct HeadConfig {
  Mode mode = Mode::segmented;
  HeadKind kind = HeadKind::max_pool;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;

  /// Sliding-window length for continuous max_pool/pyramid, and the
  /// sub-event filter length in continuous mode.
  std::size_t window = 16;
  /// Temporal-convolution kernel length.
  std::size_t kernel = 8;
  /// Pyramid divisors; empty selects the mode default ({1,2,4} segmented,
  /// {2,4,8} continuous).
  std::vector<std::size_t> pyramid_levels;
  std::size_t sub_filters = 3;
  std::size_t gaussians = 3;
  std::size_t super_filters = 3;
  std::size_t hidden = 512;

  /// Affine map applied to raw outputs (prediction = offset + scale * raw).
  /// Identity except for regression heads, which fit it to the targets.
  double output_offset = 0.0;
  double output_scale = 1.0;

  std::vector<std::size_t> levels() const;
  /// Throws ConfigError when the kind is not available in the mode or a
  /// size is zero.
  void validate() const;

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

bool supports(Mode mode, HeadKind kind);

/// Split [0, frames) into `parts` contiguous near-equal ranges; the first
/// frames % parts ranges get one extra frame.
std::vector<FrameRange> split_evenly(std::size_t frames, std::size_t parts);

/// Max-pool every interval of every pyramid level; rows are level-major,
/// left to right. Requires T >= max(levels).
Var pyramid_pool(Var v, std::span<const std::size_t> levels);

/// Centered edge-replicated window max of length L around each frame -> [T x D].
Var sliding_max_pool(Var v, std::size_t window);

/// Pyramid pooling inside each centered window -> [T x (K D)], with the K
/// segment rows of a frame laid out consecutively.
Var sliding_pyramid_pool(Var v, std::size_t window, std::span<const std::size_t> levels);

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct ParameterCount {
  std::size_t aggregation = 0;
  std::size_t classifier = 0;
  std::size_t total() const { return aggregation + classifier; }
};

/// Number of learnable scalars a head adds on top of the feature extractor.
ParameterCount count_parameters(const HeadConfig& config);

/// Parameters of a model, bound to one tape for one forward pass.
class BoundParameters {
 public:
  BoundParameters() = default;
  Var operator[](std::string_view name) const;
  std::span<const Var> vars() const { return vars_; }

 private:
  friend class Model;
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

class Model {
 public:
  Model() = default;
  /// Fresh model with seeded initialization. Linear weights are uniform in
  /// +-1/sqrt(fan_in); filter banks follow their own initializers.
  static Model create(const HeadConfig& config, std::uint64_t seed);
  /// Model from explicit parameters (e.g. a checkpoint). Names and shapes
  /// must match what `create` would produce for the config.
  static Model from_parameters(const HeadConfig& config, std::vector<NamedTensor> parameters);

  const HeadConfig& config() const { return config_; }
  std::span<const NamedTensor> parameters() const { return parameters_; }
  std::span<NamedTensor> parameters() { return parameters_; }
  const Tensor& parameter(std::string_view name) const;
  Tensor& parameter(std::string_view name);
  bool has_parameter(std::string_view name) const;
  std::size_t parameter_count() const;

  /// Put the parameters on `tape`; frozen parameters are recorded as
  /// constants and skip gradient bookkeeping.
  BoundParameters bind(Tape& tape, bool trainable = true) const;

  void set_output_affine(double offset, double scale);

 private:
  HeadConfig config_;
  std::vector<NamedTensor> parameters_;
};

/// Minimum sequence length the head accepts.
std::size_t minimum_length(const HeadConfig& config);

/// Segmented heads: v [T x D] -> logits [C].
Var forward_segmented(const Model& model, const BoundParameters& params, Var v);
/// Continuous heads: v [T x D] -> per-frame logits [T x C].
Var forward_continuous(const Model& model, const BoundParameters& params, Var v);
/// Dispatch on the configured mode.
Var forward(const Model& model, const BoundParameters& params, Var v);

/// Bidirectional LSTM over v [T x D]; returns [h_fwd_final, h_bwd_final].
Var bilstm_forward(const BoundParameters& params, Var v, std::size_t hidden);

/// Head outputs for one sequence, after the output affine map, without
/// recording gradients.
Tensor predict(const Model& model, const Tensor& features);

}  // namespace tsk

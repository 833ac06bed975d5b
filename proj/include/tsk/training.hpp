#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsk/autodiff.hpp"
#include "tsk/heads.hpp"

namespace tsk {

// ---------------------------------------------------------------------------
// Losses. Each returns a scalar Var; reductions sum over classes and frames.

/// Multi-label binary cross entropy on logits [C] against a 0/1 target [C]:
/// -sum_c [z log sigmoid(x) + (1 - z) log(1 - sigmoid(x))], evaluated as
/// sum_c softplus(x) - z x.
Var bce_multilabel_loss(Var logits, const Tensor& targets);
/// Same, summed over every frame of logits [T x C].
Var per_frame_bce(Var logits, const Tensor& targets);
/// |pred - target| for a one-element prediction. Subgradient 0 at equality.
Var l1_loss(Var prediction, double target);
/// Softmax cross entropy for a single label.
Var softmax_cross_entropy(Var logits, std::size_t label);

/// Plain-value helpers for metrics and tests.
double l1_speed_loss(double prediction, double target);
double mean_l1(std::span<const double> predictions, std::span<const double> targets);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are created on the first step and
/// mirror the parameter shapes.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<NamedTensor> params, std::span<const Tensor> grads, double learning_rate);
  void step(Tensor& param, const Tensor& grad, double learning_rate);

  std::uint64_t steps() const { return steps_; }

 private:
  void update(std::size_t slot, Tensor& param, const Tensor& grad, double learning_rate);

  AdamConfig config_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::uint64_t steps_ = 0;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double decay_factor = 0.1;
  std::size_t decay_every = 10;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  /// Worker threads for per-epoch evaluation; results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

/// learning_rate * decay_factor ^ floor(epoch / decay_every)
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

// ---------------------------------------------------------------------------
// Tasks and examples

enum class Task { multilabel, detection, speed, pitch_type };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

/// Mode a task's heads must run in.
Mode task_mode(Task task);

/// Throws ConfigError unless the head can be trained for the task.
void check_task(Task task, const HeadConfig& config);

/// One training or evaluation item. The target layout depends on the task:
/// multilabel [C] multi-hot, detection [T x C] per-frame multi-hot,
/// speed [1] mph, pitch_type [1] class index.
struct Example {
  std::string id;
  Tensor features;
  Tensor target;
};

/// Loss of one example for the task, from raw head outputs.
Var task_loss(Task task, const HeadConfig& config, Var outputs, const Tensor& target);

/// Mean task loss over the examples and the gradient of that mean w.r.t.
/// each parameter (aligned with model.parameters()).
struct BatchGradient {
  double loss = 0.0;
  std::vector<Tensor> grads;
};
BatchGradient batch_gradient(const Model& model, Task task, std::span<const Example* const> batch);

/// Head outputs for every example, in order, optionally fanned out across
/// threads.
std::vector<Tensor> predict_all(const Model& model, std::span<const Example> examples, std::size_t threads = 1);

/// Task metric: clip mAP (multilabel), per-frame mAP (detection), MAE
/// (speed) or accuracy (pitch_type).
double evaluate_task(const Model& model, Task task, std::span<const Example> examples, std::size_t threads = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double eval_metric = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
};

/// Mini-batch Adam training with step-decay learning rate. Clip order is a
/// seeded permutation per epoch, so identical inputs give bit-identical
/// parameters. The eval metric is measured on `eval` (or on `train` when
/// `eval` is empty) after each epoch.
///
/// For the speed task, the output affine map is first fitted to the mean
/// and standard deviation of the training targets.
TrainResult train(Model& model, Task task, std::span<const Example> train, std::span<const Example> eval,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace tsk

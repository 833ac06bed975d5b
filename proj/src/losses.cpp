#include <cmath>
#include <stdexcept>
#include <string>

#include "tsk/training.hpp"

namespace tsk {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double stable_sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

Var binary_cross_entropy(Var logits, const Tensor& targets, const char* op) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError(std::string(op) + ": logits " + to_string(logits.shape()) + " vs targets " +
                     to_string(targets.shape()));
  }
  double total = 0.0;
  const Tensor& x = logits.value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = targets[i];
    if (z != 0.0 && z != 1.0) throw std::invalid_argument(std::string(op) + ": targets must be 0 or 1");
    total += softplus(x[i]) - z * x[i];
  }
  return logits.tape().record(Tensor::scalar(total), {logits},
                              [logits, targets](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor* dx = tape.grad_sink(logits);
    if (!dx) return;
    const Tensor& x = logits.value();
    for (std::size_t i = 0; i < x.size(); ++i) (*dx)[i] += g[0] * (stable_sigmoid(x[i]) - targets[i]);
  });
}

}  // namespace

Var bce_multilabel_loss(Var logits, const Tensor& targets) {
  if (logits.value().rank() != 1) {
    throw ShapeError("bce_multilabel_loss: expected logits [C], got " + to_string(logits.shape()));
  }
  return binary_cross_entropy(logits, targets, "bce_multilabel_loss");
}

Var per_frame_bce(Var logits, const Tensor& targets) {
  if (logits.value().rank() != 2) {
    throw ShapeError("per_frame_bce: expected logits [T x C], got " + to_string(logits.shape()));
  }
  return binary_cross_entropy(logits, targets, "per_frame_bce");
}

Var l1_loss(Var prediction, double target) {
  if (prediction.value().size() != 1) {
    throw ShapeError("l1_loss: expected a single prediction, got " + to_string(prediction.shape()));
  }
  const double residual = prediction.value()[0] - target;
  return prediction.tape().record(Tensor::scalar(std::abs(residual)), {prediction},
                                  [prediction, residual](Tape& tape, const Tensor&, const Tensor& g) {
    if (Tensor* dp = tape.grad_sink(prediction)) {
      const double sign = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
      (*dp)[0] += g[0] * sign;
    }
  });
}

Var softmax_cross_entropy(Var logits, std::size_t label) {
  if (logits.value().rank() != 1 || logits.value().size() < 2) {
    throw ShapeError("softmax_cross_entropy: expected logits [K] with K >= 2, got " + to_string(logits.shape()));
  }
  const Tensor& x = logits.value();
  if (label >= x.size()) {
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) + " out of range for " +
                            std::to_string(x.size()) + " classes");
  }
  double peak = x[0];
  for (double v : x.data()) peak = std::max(peak, v);
  double z = 0.0;
  for (double v : x.data()) z += std::exp(v - peak);
  const double log_z = peak + std::log(z);
  return logits.tape().record(Tensor::scalar(log_z - x[label]), {logits},
                              [logits, label, log_z](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor* dx = tape.grad_sink(logits);
    if (!dx) return;
    const Tensor& x = logits.value();
    for (std::size_t i = 0; i < x.size(); ++i) {
      (*dx)[i] += g[0] * (std::exp(x[i] - log_z) - (i == label ? 1.0 : 0.0));
    }
  });
}

double l1_speed_loss(double prediction, double target) { return std::abs(prediction - target); }

double mean_l1(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw std::invalid_argument("mean_l1: need equal, non-empty prediction and target lists");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) total += std::abs(predictions[i] - targets[i]);
  return total / static_cast<double>(predictions.size());
}

}  // namespace tsk

#include <cmath>
#include <stdexcept>

#include "tsk/training.hpp"

namespace tsk {

void Adam::step(std::span<NamedTensor> params, std::span<const Tensor> grads, double learning_rate) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam::step: parameter/gradient count mismatch");
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.value.shape());
      second_.emplace_back(p.value.shape());
    }
  }
  if (first_.size() != params.size()) throw std::invalid_argument("Adam::step: parameter set changed between steps");
  ++steps_;
  for (std::size_t i = 0; i < params.size(); ++i) update(i, params[i].value, grads[i], learning_rate);
}

void Adam::step(Tensor& param, const Tensor& grad, double learning_rate) {
  if (first_.empty()) {
    first_.emplace_back(param.shape());
    second_.emplace_back(param.shape());
  }
  ++steps_;
  update(0, param, grad, learning_rate);
}

void Adam::update(std::size_t slot, Tensor& param, const Tensor& grad, double learning_rate) {
  if (param.shape() != grad.shape() || first_[slot].shape() != param.shape()) {
    throw ShapeError("Adam: gradient " + to_string(grad.shape()) + " does not match parameter " +
                     to_string(param.shape()));
  }
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  Tensor& m = first_[slot];
  Tensor& v = second_[slot];
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
    v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    param[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay factor must be in (0, 1]");
  if (decay_every == 0) throw ConfigError("decay interval must be >= 1 epoch");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  const double periods = static_cast<double>(epoch / config.decay_every);
  // Factors like 0.1 are inexact in binary; dividing by the exact integer
  // 10^k keeps 0.01 -> 0.001 -> 1e-4 correctly rounded.
  const double inverse = 1.0 / config.decay_factor;
  if (std::abs(inverse - std::round(inverse)) < 1e-9) {
    return config.learning_rate / std::pow(std::round(inverse), periods);
  }
  return config.learning_rate * std::pow(config.decay_factor, periods);
}

}  // namespace tsk

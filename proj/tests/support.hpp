#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tsk/autodiff.hpp"
#include "tsk/heads.hpp"
#include "tsk/random.hpp"
#include "tsk/training.hpp"

namespace tsk::test {

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = uniform(rng, lo, hi);
  return t;
}

/// Largest |analytic - numeric| over a tensor, divided by the tensor's
/// gradient scale (max magnitude of either gradient, floored at 1e-8).
inline double relative_error(const Tensor& analytic, const Tensor& numeric) {
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compare reverse-mode gradients of f against central differences for every
/// input. Returns the worst relative error across inputs.
inline double gradcheck(std::vector<Tensor> inputs, const ScalarFn& f, double h = 1e-5) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.parameter(x));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.constant(x));
    return f(tape, vars).value()[0];
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor numeric(inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + h;
      const double up = evaluate();
      inputs[k][i] = saved - h;
      const double down = evaluate();
      inputs[k][i] = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic[k], numeric));
  }
  return worst;
}

/// Weighted sum of a tensor's entries with fixed random weights, so every
/// output element carries a distinct gradient.
inline Var probe(Var x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(rng, x.shape());
  return sum(mul(x, x.tape().constant(std::move(w))));
}

/// Gradient check of the task loss of one example w.r.t. every model
/// parameter, using batch_gradient for the analytic side.
inline double model_gradcheck(Model model, Task task, const Example& example, double h = 1e-5) {
  const Example* batch[] = {&example};
  const BatchGradient analytic = batch_gradient(model, task, batch);
  auto loss_value = [&](const Model& m) {
    Tape tape;
    BoundParameters params = m.bind(tape, false);
    Var out = forward(m, params, tape.constant(example.features));
    return task_loss(task, m.config(), out, example.target).value()[0];
  };
  double worst = 0.0;
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor numeric(params[k].value.shape());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      double& x = params[k].value[i];
      const double saved = x;
      x = saved + h;
      const double up = loss_value(model);
      x = saved - h;
      const double down = loss_value(model);
      x = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic.grads[k], numeric));
  }
  return worst;
}

/// Empty scratch directory in the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tsk_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tsk::test

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <thread>

#include "tsk/metrics.hpp"
#include "tsk/random.hpp"
#include "tsk/training.hpp"

namespace tsk {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::multilabel: return "multilabel";
    case Task::detection: return "detection";
    case Task::speed: return "speed";
    case Task::pitch_type: return "pitch_type";
  }
  return "unknown";
}

Task parse_task(std::string_view text) {
  for (Task t : {Task::multilabel, Task::detection, Task::speed, Task::pitch_type}) {
    if (to_string(t) == text) return t;
  }
  throw ConfigError("unknown task '" + std::string(text) + "'");
}

Mode task_mode(Task task) { return task == Task::detection ? Mode::continuous : Mode::segmented; }

void check_task(Task task, const HeadConfig& config) {
  if (config.mode != task_mode(task) || !supports(config.mode, config.kind)) {
    throw ConfigError("head '" + std::string(to_string(config.kind)) + "' cannot be trained for task '" +
                      std::string(to_string(task)) + "' (needs a " + std::string(to_string(task_mode(task))) +
                      " head)");
  }
  if (task == Task::speed && config.num_classes != 1) {
    throw ConfigError("speed regression needs a single output, head has " + std::to_string(config.num_classes));
  }
  if (task == Task::pitch_type && config.num_classes < 2) {
    throw ConfigError("pitch type classification needs at least 2 classes");
  }
  config.validate();
}

Var task_loss(Task task, const HeadConfig& config, Var outputs, const Tensor& target) {
  switch (task) {
    case Task::multilabel:
      return bce_multilabel_loss(outputs, target);
    case Task::detection:
      return per_frame_bce(outputs, target);
    case Task::speed: {
      // L1 in standardized units, rescaled so the value reads in mph
      const double standardized = (target[0] - config.output_offset) / config.output_scale;
      return scale(l1_loss(outputs, standardized), config.output_scale);
    }
    case Task::pitch_type:
      return softmax_cross_entropy(outputs, static_cast<std::size_t>(target[0]));
  }
  throw ConfigError("unknown task");
}

BatchGradient batch_gradient(const Model& model, Task task, std::span<const Example* const> batch) {
  BatchGradient out;
  for (const auto& p : model.parameters()) out.grads.emplace_back(p.value.shape());
  if (batch.empty()) return out;
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const Example* example : batch) {
    Tape tape;
    BoundParameters params = model.bind(tape);
    Var outputs = forward(model, params, tape.constant(example->features));
    Var loss = task_loss(task, model.config(), outputs, example->target);
    tape.backward(loss);
    out.loss += weight * loss.value()[0];
    const auto vars = params.vars();
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const Tensor& g = tape.grad(vars[i]);
      Tensor& acc = out.grads[i];
      for (std::size_t k = 0; k < g.size(); ++k) acc[k] += weight * g[k];
    }
  }
  return out;
}

std::vector<Tensor> predict_all(const Model& model, std::span<const Example> examples, std::size_t threads) {
  std::vector<Tensor> out(examples.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, examples.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < examples.size(); ++i) out[i] = predict(model, examples[i].features);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (examples.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk, end = std::min(examples.size(), begin + chunk);
    pool.emplace_back([&, begin, end] {
      for (std::size_t i = begin; i < end; ++i) out[i] = predict(model, examples[i].features);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

double evaluate_task(const Model& model, Task task, std::span<const Example> examples, std::size_t threads) {
  if (examples.empty()) throw MetricError("no examples to evaluate");
  const auto outputs = predict_all(model, examples, threads);
  switch (task) {
    case Task::multilabel: {
      const std::size_t classes = model.config().num_classes;
      PredictionSet set{Tensor({examples.size(), classes}), Tensor({examples.size(), classes})};
      for (std::size_t i = 0; i < examples.size(); ++i) {
        std::copy_n(outputs[i].data().begin(), classes, set.scores.row(i).begin());
        std::copy_n(examples[i].target.data().begin(), classes, set.labels.row(i).begin());
      }
      return clip_map(set).mean;
    }
    case Task::detection: {
      std::vector<PredictionSet> videos;
      for (std::size_t i = 0; i < examples.size(); ++i) videos.push_back({outputs[i], examples[i].target});
      return per_frame_map(videos).mean;
    }
    case Task::speed: {
      std::vector<double> preds, targets;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        preds.push_back(outputs[i][0]);
        targets.push_back(examples[i].target[0]);
      }
      return speed_error(preds, targets).mae;
    }
    case Task::pitch_type: {
      std::vector<std::size_t> predicted, truth;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto scores = outputs[i].data();
        predicted.push_back(static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin()));
        truth.push_back(static_cast<std::size_t>(examples[i].target[0]));
      }
      return accuracy(predicted, truth);
    }
  }
  throw ConfigError("unknown task");
}

namespace {

void check_example(Task task, const HeadConfig& config, const Example& e) {
  const std::size_t classes = config.num_classes;
  const bool ok = [&] {
    switch (task) {
      case Task::multilabel: return e.target.shape() == Shape{classes};
      case Task::detection:
        return e.target.rank() == 2 && e.target.dim(0) == e.features.dim(0) && e.target.dim(1) == classes;
      case Task::speed: return e.target.size() == 1;
      case Task::pitch_type: return e.target.size() == 1 && e.target[0] >= 0.0 && e.target[0] < static_cast<double>(classes);
    }
    return false;
  }();
  if (!ok) {
    throw ConfigError("example '" + e.id + "' target " + to_string(e.target.shape()) + " does not fit task '" +
                      std::string(to_string(task)) + "' with " + std::to_string(classes) + " classes");
  }
}

}  // namespace

TrainResult train(Model& model, Task task, std::span<const Example> train, std::span<const Example> eval,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  check_task(task, model.config());
  if (train.empty()) throw ConfigError("training set is empty");
  for (const auto& e : train) check_example(task, model.config(), e);
  for (const auto& e : eval) check_example(task, model.config(), e);

  if (task == Task::speed) {
    double mean = 0.0;
    for (const auto& e : train) mean += e.target[0];
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (const auto& e : train) var += (e.target[0] - mean) * (e.target[0] - mean);
    const double sd = std::sqrt(var / static_cast<double>(train.size()));
    model.set_output_affine(mean, sd > 0.0 ? sd : 1.0);
  }

  std::mt19937_64 rng(mix_seed(config.seed, 1));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Adam adam;
  TrainResult result;
  const auto eval_set = eval.empty() ? train : eval;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);
    }
    const double lr = lr_at_epoch(config, epoch);
    double loss_sum = 0.0;
    std::vector<const Example*> batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t j = start; j < std::min(order.size(), start + config.batch_size); ++j) {
        batch.push_back(&train[order[j]]);
      }
      BatchGradient bg = batch_gradient(model, task, batch);
      loss_sum += bg.loss * static_cast<double>(batch.size());
      adam.step(model.parameters(), bg.grads, lr);
    }
    EpochRecord record{epoch, lr, loss_sum / static_cast<double>(train.size()),
                       evaluate_task(model, task, eval_set, config.threads)};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,lr,train_loss,eval_metric\n";
  out << std::setprecision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.learning_rate << ',' << r.train_loss << ',' << r.eval_metric << '\n';
  }
}

}  // namespace tsk

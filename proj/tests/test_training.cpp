#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "tsk/dataset.hpp"
#include "tsk/metrics.hpp"
#include "tsk/synthetic.hpp"
#include "tsk/training.hpp"

using namespace tsk;
using tsk::test::gradcheck;
using tsk::test::random_tensor;

namespace {

double loss_of(Var (*fn)(Var, const Tensor&), const Tensor& logits, const Tensor& targets) {
  Tape tape;
  return fn(tape.constant(logits), targets).value()[0];
}

/// Direct -[z log s + (1-z) log(1-s)] in long double.
long double bce_oracle(const Tensor& x, const Tensor& z) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(x[i])));
    total -= z[i] * std::log(s) + (1.0L - z[i]) * std::log(1.0L - s);
  }
  return total;
}

HeadConfig segmented_config(HeadKind kind, std::size_t D, std::size_t C) {
  HeadConfig c;
  c.kind = kind;
  c.feature_dim = D;
  c.num_classes = C;
  return c;
}

}  // namespace

TEST_CASE("multi-label BCE") {
  CHECK(loss_of(bce_multilabel_loss, Tensor::vector({0, 0}), Tensor::vector({1, 0})) ==
        doctest::Approx(2 * std::numbers::ln2));
  CHECK(loss_of(bce_multilabel_loss, Tensor::vector({40}), Tensor::vector({1})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(loss_of(bce_multilabel_loss, Tensor::vector({-800}), Tensor::vector({1}))));
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor(rng, {5}, -6, 6);
    Tensor z({5});
    for (double& v : z.data()) v = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    const double loss = loss_of(bce_multilabel_loss, x, z);
    CHECK(loss >= 0.0);
    CHECK(loss == doctest::Approx(static_cast<double>(bce_oracle(x, z))).epsilon(1e-12));
    CHECK(gradcheck({x}, [&z](Tape&, std::span<const Var> v) { return bce_multilabel_loss(v[0], z); }) <= 1e-4);
  }
  Tape tape;
  CHECK_THROWS_AS(bce_multilabel_loss(tape.constant(Tensor::vector({0, 0})), Tensor::vector({1})), ShapeError);
  CHECK_THROWS(bce_multilabel_loss(tape.constant(Tensor::vector({0})), Tensor::vector({0.5})));
}

TEST_CASE("per-frame BCE") {
  CHECK(loss_of(per_frame_bce, Tensor::zeros({2, 2}), Tensor::zeros({2, 2})) == doctest::Approx(4 * std::numbers::ln2));
  std::mt19937_64 rng(42);
  const Tensor x = random_tensor(rng, {1, 3}, -3, 3);
  const Tensor z = Tensor::matrix({{1, 0, 1}});
  CHECK(loss_of(per_frame_bce, x, z) == loss_of(bce_multilabel_loss, x.reshaped({3}), z.reshaped({3})));
  const Tensor X = random_tensor(rng, {4, 3}, -3, 3);
  Tensor Z({4, 3});
  for (double& v : Z.data()) v = uniform01(rng) < 0.5 ? 1.0 : 0.0;
  double looped = 0.0;
  for (std::size_t t = 0; t < 4; ++t) {
    Tensor xt({3}), zt({3});
    for (std::size_t c = 0; c < 3; ++c) {
      xt[c] = X.at(t, c);
      zt[c] = Z.at(t, c);
    }
    looped += loss_of(bce_multilabel_loss, xt, zt);
  }
  CHECK(loss_of(per_frame_bce, X, Z) == doctest::Approx(looped).epsilon(1e-12));
  CHECK(gradcheck({X}, [&Z](Tape&, std::span<const Var> v) { return per_frame_bce(v[0], Z); }) <= 1e-4);
}

TEST_CASE("L1 losses") {
  CHECK(l1_speed_loss(92, 95) == 3.0);
  CHECK(l1_speed_loss(95, 95) == 0.0);
  const double preds[] = {1, -2, 0}, targets[] = {0, 0, 0};
  CHECK(mean_l1(preds, targets) == 1.0);
  Tape tape;
  Var p = tape.parameter(Tensor::scalar(92));
  Var loss = l1_loss(p, 95);
  CHECK(loss.value()[0] == 3.0);
  tape.backward(loss);
  CHECK(tape.grad(p)[0] == -1.0);
}

TEST_CASE("softmax cross entropy") {
  Tape tape;
  CHECK(softmax_cross_entropy(tape.constant(Tensor::zeros({6})), 2).value()[0] == doctest::Approx(std::log(6.0)));
  CHECK(softmax_cross_entropy(tape.constant(Tensor::vector({50, 0, 0})), 0).value()[0] ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(softmax_cross_entropy(tape.constant(Tensor::zeros({3})), 3), std::out_of_range);
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_tensor(rng, {6}, -5, 5);
    const std::size_t label = rng() % 6;
    long double z = 0.0L;
    for (double v : x.data()) z += std::exp(static_cast<long double>(v));
    const long double expect = std::log(z) - x[label];
    CHECK(softmax_cross_entropy(tape.constant(x), label).value()[0] ==
          doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
    CHECK(gradcheck({x}, [label](Tape&, std::span<const Var> v) { return softmax_cross_entropy(v[0], label); }) <= 1e-4);
  }
}

TEST_CASE("Adam first step, zero gradient and a quadratic") {
  for (double g : {0.3, -7.0, 1e-3}) {
    Adam adam;
    Tensor x = Tensor::scalar(1.0);
    adam.step(x, Tensor::scalar(g), 0.01);
    CHECK(x[0] == doctest::Approx(1.0 - 0.01 * (g > 0 ? 1 : -1)).epsilon(1e-6));
  }
  Adam still;
  Tensor y = Tensor::vector({1, 2});
  for (int i = 0; i < 5; ++i) still.step(y, Tensor::zeros({2}), 0.01);
  CHECK(y == Tensor::vector({1, 2}));

  Adam adam;
  Tensor x = Tensor::scalar(1.0);
  double previous = 1.0;
  for (int i = 0; i < 100; ++i) {
    adam.step(x, Tensor::scalar(2 * x[0]), 0.01);
    CHECK(std::abs(x[0]) < previous);
    previous = std::abs(x[0]);
  }
  CHECK(std::abs(x[0]) < 0.5);
  CHECK(adam.steps() == 100);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  CHECK(c.learning_rate == 0.01);
  CHECK(c.epochs == 50);
  CHECK(lr_at_epoch(c, 0) == 0.01);
  CHECK(lr_at_epoch(c, 9) == 0.01);
  CHECK(lr_at_epoch(c, 10) == 0.001);
  CHECK(lr_at_epoch(c, 20) == 1e-4);
  CHECK(lr_at_epoch(c, 49) == 1e-6);
  for (std::size_t e = 1; e < 60; ++e) CHECK(lr_at_epoch(c, e) <= lr_at_epoch(c, e - 1));
  c.decay_factor = 0.5;
  CHECK(lr_at_epoch(c, 25) == 0.0025);
  c.decay_factor = 0.3;
  CHECK(lr_at_epoch(c, 10) == doctest::Approx(0.003));
  TrainConfig bad;
  bad.decay_every = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("task compatibility") {
  CHECK(parse_task("speed") == Task::speed);
  CHECK_THROWS_AS(parse_task("segmentation"), ConfigError);
  HeadConfig c = segmented_config(HeadKind::sub_events, 4, 3);
  CHECK_NOTHROW(check_task(Task::multilabel, c));
  CHECK_THROWS_AS(check_task(Task::detection, c), ConfigError);
  CHECK_THROWS_AS(check_task(Task::speed, c), ConfigError);
  c.num_classes = 1;
  CHECK_NOTHROW(check_task(Task::speed, c));
  CHECK_THROWS_AS(check_task(Task::pitch_type, c), ConfigError);
}

TEST_CASE("one small Adam step does not increase the batch loss") {
  std::mt19937_64 rng(44);
  for (HeadKind kind : {HeadKind::max_pool, HeadKind::sub_events, HeadKind::pyramid}) {
    Model m = Model::create(segmented_config(kind, 4, 3), 3);
    std::vector<Example> data;
    for (int i = 0; i < 6; ++i) {
      Tensor z({3});
      for (double& v : z.data()) v = uniform01(rng) < 0.5 ? 1.0 : 0.0;
      data.push_back({"e", random_tensor(rng, {10, 4}), z});
    }
    std::vector<const Example*> batch;
    for (const auto& e : data) batch.push_back(&e);
    const BatchGradient before = batch_gradient(m, Task::multilabel, batch);
    Adam adam;
    adam.step(m.parameters(), before.grads, 1e-4);
    CHECK(batch_gradient(m, Task::multilabel, batch).loss <= before.loss);
  }
}

TEST_CASE("one optimizer step updates exactly count_parameters scalars") {
  std::mt19937_64 rng(45);
  HeadConfig c = segmented_config(HeadKind::sub_events, 4, 3);
  Model m = Model::create(c, 1);
  const Model before = m;
  Example e{"e", random_tensor(rng, {9, 4}), Tensor::vector({1, 0, 1})};
  const Example* batch[] = {&e};
  Adam adam;
  adam.step(m.parameters(), batch_gradient(m, Task::multilabel, batch).grads, 0.01);
  std::size_t changed = 0;
  for (std::size_t k = 0; k < m.parameters().size(); ++k)
    for (std::size_t i = 0; i < m.parameters()[k].value.size(); ++i)
      changed += m.parameters()[k].value[i] != before.parameters()[k].value[i] ? 1 : 0;
  CHECK(changed == count_parameters(c).total());
}

TEST_CASE("initial loss of averaging heads is about C ln 2 per clip") {
  SyntheticSpec spec;
  spec.classes = 8;
  const auto data = segmented_examples(generate_synthetic_segmented(spec, 40));
  std::vector<const Example*> batch;
  for (const auto& e : data) batch.push_back(&e);
  for (HeadKind kind : {HeadKind::mean_pool, HeadKind::sub_events}) {
    const Model m = Model::create(segmented_config(kind, spec.dim, 8), 2);
    CHECK(batch_gradient(m, Task::multilabel, batch).loss == doctest::Approx(8 * std::numbers::ln2).epsilon(0.2));
  }
}

TEST_CASE("training is deterministic and fits a separable set") {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 8;
  spec.t_min = 12;
  spec.t_max = 20;
  spec.noise = 0.0;
  spec.amplitude = 3.0;
  spec.hard_negative_prob = 0.0;
  spec.seed = 5;
  const auto data = segmented_examples(generate_synthetic_segmented(spec, 40));
  TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 7;
  tc.threads = 2;
  Model a = Model::create(segmented_config(HeadKind::max_pool, 8, 3), 7);
  Model b = a;
  const auto ha = train(a, Task::multilabel, data, {}, tc).history;
  tc.threads = 1;
  const auto hb = train(b, Task::multilabel, data, {}, tc).history;
  for (std::size_t k = 0; k < a.parameters().size(); ++k) CHECK(a.parameters()[k].value == b.parameters()[k].value);
  REQUIRE(ha.size() == 30);
  CHECK(ha.back().eval_metric == 1.0);
  CHECK(ha.back().train_loss == hb.back().train_loss);
  CHECK(evaluate_task(a, Task::multilabel, data, 3) == 1.0);

  std::ostringstream csv;
  write_history_csv(csv, ha);
  CHECK(csv.str().rfind("epoch,lr,train_loss,eval_metric\n0,0.01,", 0) == 0);
}

TEST_CASE("training rejects mismatched tasks and targets before starting") {
  std::mt19937_64 rng(46);
  Model m = Model::create(segmented_config(HeadKind::max_pool, 2, 2), 1);
  std::vector<Example> data{{"a", random_tensor(rng, {4, 2}), Tensor::vector({1, 0, 1})}};
  CHECK_THROWS_AS(train(m, Task::multilabel, data, {}, TrainConfig{}), ConfigError);
  CHECK_THROWS_AS(train(m, Task::detection, data, {}, TrainConfig{}), ConfigError);
  CHECK_THROWS_AS(train(m, Task::multilabel, {}, {}, TrainConfig{}), ConfigError);
}

TEST_CASE("speed and pitch-type tasks train end to end") {
  SyntheticSpec spec = task_preset(Task::speed);
  spec.dim = 4;
  const auto speed = speed_examples(generate_synthetic_speed(spec, 30));
  Model m = Model::create(segmented_config(HeadKind::sub_events, 4, 1), 2);
  TrainConfig tc;
  tc.epochs = 3;
  const auto history = train(m, Task::speed, speed, {}, tc).history;
  CHECK(m.config().output_scale > 1.0);
  CHECK(m.config().output_offset > 70.0);
  CHECK(std::isfinite(history.back().eval_metric));
  CHECK(tsk::test::model_gradcheck(m, Task::speed, speed[0]) <= 1e-4);

  SyntheticSpec pitch_spec = task_preset(Task::pitch_type);
  pitch_spec.dim = 8;
  const auto pitches = pitch_examples(generate_synthetic_pitch(pitch_spec, 30));
  Model p = Model::create(segmented_config(HeadKind::max_pool, 8, 6), 3);
  const auto ph = train(p, Task::pitch_type, pitches, {}, tc).history;
  CHECK(ph.back().eval_metric >= 0.0);
  CHECK(ph.back().eval_metric <= 1.0);
  CHECK(tsk::test::model_gradcheck(p, Task::pitch_type, pitches[0]) <= 1e-4);
}

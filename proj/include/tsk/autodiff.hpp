#pragma once

// Define-by-run reverse-mode differentiation.
//
// A Tape records every operation applied to its variables. Calling
// backward() on a scalar result walks the record in reverse and leaves a
// gradient for each variable that requires one. The tape is rebuilt for
// every forward pass; it is single-threaded.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tsk/tensor.hpp"

namespace tsk {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Called during backward with the node's output value and the gradient
  /// flowing into it. Implementations push gradients into their inputs via
  /// Tape::grad_sink.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_value, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Record a derived value. It requires a gradient iff any input does; the
  /// backward function is dropped otherwise.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

  /// Gradient buffer of `v` to accumulate into, or nullptr when `v` does not
  /// require a gradient. Only valid inside a backward pass.
  Tensor* grad_sink(Var v);

  /// Gradient of the last backward() loss w.r.t. `v`. Variables that were not
  /// reachable from the loss get a zero gradient of the right shape.
  const Tensor& grad(Var v) const;

  /// Reverse sweep from a scalar loss. A tape can be swept once; a second
  /// call throws std::logic_error.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool swept() const noexcept { return swept_; }

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var push(Node node);
  void check_owner(Var v) const;

  // deque keeps value() references valid while later nodes are recorded
  std::deque<Node> nodes_;
  bool swept_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }

// ---------------------------------------------------------------------------
// Differentiable operations. All inputs must live on the same tape.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double k, Var a) { return scale(a, k); }

/// [M x K] x [K x N] -> [M x N].
Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

enum class Activation { sigmoid, tanh, exp };
Var activation(Var x, Activation kind);
inline Var sigmoid(Var x) { return activation(x, Activation::sigmoid); }
inline Var tanh(Var x) { return activation(x, Activation::tanh); }
inline Var exp(Var x) { return activation(x, Activation::exp); }

/// Softmax over the last axis of a rank-2 tensor.
Var softmax_rows(Var x);

enum class Padding { valid, same_replicate };

/// First frame of the centered window of length `length` around frame t.
inline std::ptrdiff_t window_start(std::ptrdiff_t t, std::size_t length) {
  return t - static_cast<std::ptrdiff_t>((length - 1) / 2);
}

/// Temporal convolution (cross-correlation) of v [T x D] with a kernel
/// [L x D x D']. `same_replicate` centers the kernel on each frame and clamps
/// out-of-range frames to the nearest edge, so the output keeps T rows.
Var conv1d_temporal(Var v, Var kernel, Padding padding);

enum class PoolKind { max, mean };

/// Pool over the time axis of v [T x D] -> [D]. Max routes its gradient to
/// the first arg-max frame.
Var pool_time(Var v, PoolKind kind);

/// Inclusive frame range [first, last].
struct FrameRange {
  std::size_t first;
  std::size_t last;
};

/// Max over each frame range of v [T x D] -> [K x D]. Ties route the gradient
/// to the earliest frame.
Var range_max(Var v, std::span<const FrameRange> ranges);

/// x [K] or [R x K], weight [K x C], bias [C] -> [C] or [R x C].
Var linear(Var x, Var weight, Var bias);

/// Row r of a rank-2 tensor, as a vector.
Var row(Var x, std::size_t r);
/// Elements [offset, offset + length) of a vector.
Var slice(Var x, std::size_t offset, std::size_t length);
/// Concatenate vectors end to end.
Var concat(std::span<const Var> parts);
/// [T x P] and [T x Q] -> [T x (P + Q)].
Var concat_columns(Var a, Var b);
/// Repeat a vector [Q] as T rows -> [T x Q].
Var tile_rows(Var x, std::size_t rows);

}  // namespace tsk

#include "tsk/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tsk {

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Node node) {
  if (swept_) throw std::logic_error("tape already swept; record a new forward pass");
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(Var v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this tape");
  }
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::parameter(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    check_owner(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

Tensor* Tape::grad_sink(Var v) {
  check_owner(v);
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return nullptr;
  if (!node.grad) node.grad = Tensor::zeros(node.value.shape());
  return &*node.grad;
}

const Tensor& Tape::grad(Var v) const {
  check_owner(v);
  const Node& node = nodes_[v.id()];
  if (!swept_) throw std::logic_error("grad() requested before backward()");
  if (!node.requires_grad) throw std::logic_error("variable does not require a gradient");
  return *node.grad;
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (swept_) throw std::logic_error("backward() already ran on this tape");
  if (value(loss).size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + to_string(value(loss).shape()));
  }
  swept_ = true;
  if (nodes_[loss.id()].requires_grad) {
    nodes_[loss.id()].grad = Tensor::full(value(loss).shape(), 1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.requires_grad || !node.grad || !node.backward) continue;
      node.backward(*this, node.value, *node.grad);
    }
  }
  for (Node& node : nodes_) {
    if (node.requires_grad && !node.grad) node.grad = Tensor::zeros(node.value.shape());
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(Var a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(a.shape()));
  }
}

void accumulate(Tensor* sink, const Tensor& g, double factor = 1.0) {
  if (!sink) return;
  auto dst = sink->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor&, const Tensor& g) {
    accumulate(tape.grad_sink(a), g);
    accumulate(tape.grad_sink(b), g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor&, const Tensor& g) {
    accumulate(tape.grad_sink(a), g);
    accumulate(tape.grad_sink(b), g, -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor&, const Tensor& g) {
    if (Tensor* da = tape.grad_sink(a)) {
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * bv[i];
    }
    if (Tensor* db = tape.grad_sink(b)) {
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& x : out.data()) x *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, const Tensor&, const Tensor& g) {
    accumulate(tape.grad_sink(a), g, factor);
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  return a.tape().record(Tensor::scalar(total), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    if (Tensor* da = tape.grad_sink(a)) {
      for (double& x : da->data()) x += g[0];
    }
  });
}

Var matmul(Var a, Var b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  if (b.value().dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree, " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av.at(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
    }
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& tape, const Tensor&, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (Tensor* da = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g.at(i, j) * bv.at(p, j);
          da->at(i, p) += acc;
        }
    }
    if (Tensor* db = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av.at(i, p);
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) db->at(p, j) += aip * g.at(i, j);
        }
    }
  });
}

Var transpose(Var a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.value().dim(0), c = a.value().dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.value().at(i, j);
  return a.tape().record(std::move(out), {a}, [a, r, c](Tape& tape, const Tensor&, const Tensor& g) {
    if (Tensor* da = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) da->at(i, j) += g.at(j, i);
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    accumulate(tape.grad_sink(a), g);
  });
}

Var activation(Var x, Activation kind) {
  Tensor out = x.value();
  for (double& v : out.data()) {
    switch (kind) {
      case Activation::sigmoid:
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        break;
      case Activation::tanh:
        v = std::tanh(v);
        break;
      case Activation::exp:
        v = std::exp(v);
        break;
    }
  }
  return x.tape().record(std::move(out), {x}, [x, kind](Tape& tape, const Tensor& y, const Tensor& g) {
    Tensor* dx = tape.grad_sink(x);
    if (!dx) return;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double local = 0.0;
      switch (kind) {
        case Activation::sigmoid: local = y[i] * (1.0 - y[i]); break;
        case Activation::tanh: local = 1.0 - y[i] * y[i]; break;
        case Activation::exp: local = y[i]; break;
      }
      (*dx)[i] += g[i] * local;
    }
  });
}

Var softmax_rows(Var x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t r = x.value().dim(0), c = x.value().dim(1);
  Tensor out = x.value();
  for (std::size_t i = 0; i < r; ++i) {
    auto row = out.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - peak));
    for (double& v : row) v /= z;
  }
  return x.tape().record(std::move(out), {x}, [x, r, c](Tape& tape, const Tensor& y, const Tensor& g) {
    Tensor* dx = tape.grad_sink(x);
    if (!dx) return;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < c; ++j) dx->at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  });
}

Var conv1d_temporal(Var v, Var kernel, Padding padding) {
  require_rank(v, 2, "conv1d_temporal");
  require_rank(kernel, 3, "conv1d_temporal kernel");
  const std::size_t frames = v.value().dim(0), in_dim = v.value().dim(1);
  const std::size_t length = kernel.value().dim(0), out_dim = kernel.value().dim(2);
  if (length == 0) throw ShapeError("conv1d_temporal: kernel length must be >= 1");
  if (kernel.value().dim(1) != in_dim) {
    throw ShapeError("conv1d_temporal: kernel " + to_string(kernel.shape()) +
                     " does not match feature dim " + std::to_string(in_dim));
  }
  if (padding == Padding::valid && length > frames) {
    throw ShapeError("conv1d_temporal: kernel length " + std::to_string(length) +
                     " exceeds sequence length " + std::to_string(frames));
  }
  const std::size_t out_frames = padding == Padding::valid ? frames - length + 1 : frames;
  auto source = [=](std::size_t t, std::size_t k) -> std::size_t {
    if (padding == Padding::valid) return t + k;
    const std::ptrdiff_t s = window_start(static_cast<std::ptrdiff_t>(t), length) +
                             static_cast<std::ptrdiff_t>(k);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(s, 0, static_cast<std::ptrdiff_t>(frames) - 1));
  };

  const Tensor& vv = v.value();
  const Tensor& kv = kernel.value();
  Tensor out({out_frames, out_dim});
  for (std::size_t t = 0; t < out_frames; ++t) {
    auto dst = out.row(t);
    for (std::size_t k = 0; k < length; ++k) {
      auto src = vv.row(source(t, k));
      for (std::size_t d = 0; d < in_dim; ++d) {
        const double x = src[d];
        const double* w = &kv.at(k, d, 0);
        for (std::size_t e = 0; e < out_dim; ++e) dst[e] += x * w[e];
      }
    }
  }
  return v.tape().record(std::move(out), {v, kernel},
                         [=](Tape& tape, const Tensor&, const Tensor& g) {
    const Tensor& vv = v.value();
    const Tensor& kv = kernel.value();
    Tensor* dv = tape.grad_sink(v);
    Tensor* dk = tape.grad_sink(kernel);
    for (std::size_t t = 0; t < out_frames; ++t) {
      auto gt = g.row(t);
      for (std::size_t k = 0; k < length; ++k) {
        const std::size_t s = source(t, k);
        for (std::size_t d = 0; d < in_dim; ++d) {
          const double* w = &kv.at(k, d, 0);
          if (dv) {
            double acc = 0.0;
            for (std::size_t e = 0; e < out_dim; ++e) acc += gt[e] * w[e];
            dv->at(s, d) += acc;
          }
          if (dk) {
            const double x = vv.at(s, d);
            double* dw = &dk->at(k, d, 0);
            for (std::size_t e = 0; e < out_dim; ++e) dw[e] += x * gt[e];
          }
        }
      }
    }
  });
}

Var pool_time(Var v, PoolKind kind) {
  require_rank(v, 2, "pool_time");
  const std::size_t frames = v.value().dim(0);
  if (frames == 0) throw ShapeError("pool_time: empty sequence");
  if (kind == PoolKind::max) {
    const FrameRange whole{0, frames - 1};
    return reshape(range_max(v, std::span<const FrameRange>(&whole, 1)), {v.value().dim(1)});
  }
  const std::size_t dim = v.value().dim(1);
  Tensor out({dim});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t d = 0; d < dim; ++d) out[d] += v.value().at(t, d);
  for (double& x : out.data()) x /= static_cast<double>(frames);
  return v.tape().record(std::move(out), {v}, [v, frames, dim](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor* dv = tape.grad_sink(v);
    if (!dv) return;
    const double w = 1.0 / static_cast<double>(frames);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t d = 0; d < dim; ++d) dv->at(t, d) += w * g[d];
  });
}


Var range_max(Var v, std::span<const FrameRange> ranges) {
  require_rank(v, 2, "range_max");
  const std::size_t frames = v.value().dim(0), dim = v.value().dim(1);
  const std::size_t count = ranges.size();
  // arg-max frame per (range, channel)
  std::vector<std::size_t> winner(count * dim);
  Tensor out({count, dim});
  const Tensor& vv = v.value();
  for (std::size_t r = 0; r < count; ++r) {
    const FrameRange range = ranges[r];
    if (range.first > range.last || range.last >= frames) {
      throw ShapeError("range_max: frame range [" + std::to_string(range.first) + ", " +
                       std::to_string(range.last) + "] outside sequence of length " +
                       std::to_string(frames));
    }
    for (std::size_t d = 0; d < dim; ++d) {
      std::size_t best = range.first;
      for (std::size_t t = range.first + 1; t <= range.last; ++t) {
        if (vv.at(t, d) > vv.at(best, d)) best = t;
      }
      winner[r * dim + d] = best;
      out.at(r, d) = vv.at(best, d);
    }
  }
  return v.tape().record(std::move(out), {v},
                         [v, dim, winner = std::move(winner)](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor* dv = tape.grad_sink(v);
    if (!dv) return;
    for (std::size_t i = 0; i < winner.size(); ++i) dv->at(winner[i], i % dim) += g[i];
  });
}

Var linear(Var x, Var weight, Var bias) {
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const std::size_t in = weight.value().dim(0), classes = weight.value().dim(1);
  if (bias.value().dim(0) != classes) {
    throw ShapeError("linear: bias " + to_string(bias.shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }
  const std::size_t rank = x.value().rank();
  if ((rank != 1 && rank != 2) || x.shape().back() != in) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }
  const std::size_t rows = rank == 1 ? 1 : x.value().dim(0);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  Tensor out = rank == 1 ? Tensor({classes}) : Tensor({rows, classes});
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = &out[r * classes];
    for (std::size_t c = 0; c < classes; ++c) dst[c] = bias.value()[c];
    for (std::size_t k = 0; k < in; ++k) {
      const double xk = xv[r * in + k];
      if (xk == 0.0) continue;
      const double* w = &wv[k * classes];
      for (std::size_t c = 0; c < classes; ++c) dst[c] += xk * w[c];
    }
  }
  return x.tape().record(std::move(out), {x, weight, bias},
                         [=](Tape& tape, const Tensor&, const Tensor& g) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    Tensor* dx = tape.grad_sink(x);
    Tensor* dw = tape.grad_sink(weight);
    Tensor* db = tape.grad_sink(bias);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = &g[r * classes];
      if (db) {
        for (std::size_t c = 0; c < classes; ++c) (*db)[c] += gr[c];
      }
      for (std::size_t k = 0; k < in; ++k) {
        const double* w = &wv[k * classes];
        if (dx) {
          double acc = 0.0;
          for (std::size_t c = 0; c < classes; ++c) acc += gr[c] * w[c];
          (*dx)[r * in + k] += acc;
        }
        if (dw) {
          const double xk = xv[r * in + k];
          double* dwk = &(*dw)[k * classes];
          for (std::size_t c = 0; c < classes; ++c) dwk[c] += xk * gr[c];
        }
      }
    }
  });
}

Var row(Var x, std::size_t r) {
  require_rank(x, 2, "row");
  const std::size_t cols = x.value().dim(1);
  if (r >= x.value().dim(0)) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " + to_string(x.shape()));
  }
  auto src = x.value().row(r);
  Tensor out({cols}, std::vector<double>(src.begin(), src.end()));
  return x.tape().record(std::move(out), {x}, [x, r](Tape& tape, const Tensor&, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(x)) {
      auto dst = dx->row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j];
    }
  });
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  require_rank(x, 1, "slice");
  if (offset + length > x.value().size() || length == 0) {
    throw ShapeError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for " + to_string(x.shape()));
  }
  auto src = x.value().data().subspan(offset, length);
  Tensor out({length}, std::vector<double>(src.begin(), src.end()));
  return x.tape().record(std::move(out), {x}, [x, offset](Tape& tape, const Tensor&, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(x)) {
      for (std::size_t j = 0; j < g.size(); ++j) (*dx)[offset + j] += g[j];
    }
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<double> data;
  for (Var p : parts) {
    require_rank(p, 1, "concat");
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(Tensor::vector(std::move(data)), parts,
                                     [inputs](Tape& tape, const Tensor&, const Tensor& g) {
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t n = p.value().size();
      if (Tensor* dp = tape.grad_sink(p)) {
        for (std::size_t j = 0; j < n; ++j) (*dp)[j] += g[offset + j];
      }
      offset += n;
    }
  });
}

Var concat_columns(Var a, Var b) {
  require_rank(a, 2, "concat_columns");
  require_rank(b, 2, "concat_columns");
  const std::size_t rows = a.value().dim(0), p = a.value().dim(1), q = b.value().dim(1);
  if (b.value().dim(0) != rows) {
    throw ShapeError("concat_columns: row counts differ, " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  Tensor out({rows, p + q});
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r);
    std::copy_n(a.value().row(r).begin(), p, dst.begin());
    std::copy_n(b.value().row(r).begin(), q, dst.begin() + static_cast<std::ptrdiff_t>(p));
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, rows, p, q](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor* da = tape.grad_sink(a);
    Tensor* db = tape.grad_sink(b);
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = g.row(r);
      if (da)
        for (std::size_t j = 0; j < p; ++j) da->at(r, j) += src[j];
      if (db)
        for (std::size_t j = 0; j < q; ++j) db->at(r, j) += src[p + j];
    }
  });
}

Var tile_rows(Var x, std::size_t rows) {
  require_rank(x, 1, "tile_rows");
  const std::size_t cols = x.value().size();
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.value().data().begin(), cols, out.row(r).begin());
  return x.tape().record(std::move(out), {x}, [x, rows, cols](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor* dx = tape.grad_sink(x);
    if (!dx) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) (*dx)[j] += g.at(r, j);
  });
}

}  // namespace tsk

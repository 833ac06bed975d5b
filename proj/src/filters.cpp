#include "tsk/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tsk/random.hpp"

namespace tsk {

namespace {

void require_vector(Var v, std::size_t n, const char* what) {
  if (v.value().rank() != 1 || v.value().size() != n) {
    throw ShapeError(std::string(what) + ": expected a vector of length " + std::to_string(n) +
                     ", got " + to_string(v.shape()));
  }
}

/// In-place softmax of a logit row; returns nothing, leaves probabilities.
void normalize_logits(std::span<double> row) {
  const double peak = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double& x : row) z += (x = std::exp(x - peak));
  for (double& x : row) x /= z;
}

/// Gradient of a loss w.r.t. the logits of a softmax row, given the
/// probabilities p and the incoming gradient g.
double softmax_backward(std::span<const double> p, std::span<const double> g, std::size_t t, double dot) {
  return p[t] * (g[t] - dot);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

SubEventFilterBank SubEventFilterBank::initialize(std::size_t filters, std::size_t gaussians,
                                                  std::mt19937_64& rng) {
  SubEventFilterBank bank;
  bank.gaussians = gaussians;
  bank.center = Tensor({filters});
  bank.stride = Tensor({filters});
  bank.width = Tensor::full({filters}, 0.5);
  for (std::size_t m = 0; m < filters; ++m) {
    bank.center[m] = uniform(rng, -0.5, 0.5);
    bank.stride[m] = uniform(rng, -0.5, 0.5);
  }
  return bank;
}

SuperEventFilterBank SuperEventFilterBank::initialize(std::size_t filters, std::size_t classes,
                                                      std::mt19937_64& rng) {
  SuperEventFilterBank bank;
  bank.center = Tensor({filters});
  bank.width = Tensor({filters});
  bank.attention = Tensor({classes, filters});
  for (std::size_t m = 0; m < filters; ++m) {
    bank.center[m] = uniform(rng, -0.5, 0.5);
    bank.width[m] = uniform(rng, -0.5, 0.5);
  }
  for (double& a : bank.attention.data()) a = uniform(rng, -0.1, 0.1);
  return bank;
}

std::vector<double> gaussian_centers(double center, double stride, std::size_t gaussians, std::size_t length) {
  if (gaussians < 2) throw std::invalid_argument("sub-event filters need at least 2 Gaussians");
  const double t = static_cast<double>(length);
  const double n = static_cast<double>(gaussians);
  const double g = 0.5 * t * (center + 1.0);
  const double delta = t / (n - 1.0) * stride;
  std::vector<double> mu(gaussians);
  for (std::size_t i = 0; i < gaussians; ++i) {
    mu[i] = g + (static_cast<double>(i) - 0.5 * n + 0.5) * delta;
  }
  return mu;
}

Var gaussian_filters(Var center, Var stride, Var width, std::size_t gaussians, std::size_t length) {
  if (length == 0) throw std::invalid_argument("gaussian_filters: length must be >= 1");
  if (gaussians < 2) throw std::invalid_argument("gaussian_filters: N must be >= 2, got " + std::to_string(gaussians));
  const std::size_t filters = center.value().size();
  require_vector(center, filters, "gaussian_filters center");
  require_vector(stride, filters, "gaussian_filters stride");
  require_vector(width, filters, "gaussian_filters width");

  Tensor out({filters, gaussians, length});
  for (std::size_t m = 0; m < filters; ++m) {
    const auto mu = gaussian_centers(center.value()[m], stride.value()[m], gaussians, length);
    const double sigma = width.value()[m];
    const double var = sigma * sigma + kGaussianWidthEpsilon;
    for (std::size_t i = 0; i < gaussians; ++i) {
      std::span<double> row(&out.at(m, i, 0), length);
      for (std::size_t t = 0; t < length; ++t) {
        const double diff = static_cast<double>(t) - mu[i];
        row[t] = -diff * diff / (2.0 * var);
      }
      normalize_logits(row);
    }
  }

  return center.tape().record(std::move(out), {center, stride, width},
                              [=](Tape& tape, const Tensor& f, const Tensor& g) {
    Tensor* d_center = tape.grad_sink(center);
    Tensor* d_stride = tape.grad_sink(stride);
    Tensor* d_width = tape.grad_sink(width);
    const double t_len = static_cast<double>(length);
    const double n = static_cast<double>(gaussians);
    for (std::size_t m = 0; m < filters; ++m) {
      const auto mu = gaussian_centers(center.value()[m], stride.value()[m], gaussians, length);
      const double sigma = width.value()[m];
      const double var = sigma * sigma + kGaussianWidthEpsilon;
      for (std::size_t i = 0; i < gaussians; ++i) {
        std::span<const double> p(&f.at(m, i, 0), length);
        std::span<const double> gi(&g.at(m, i, 0), length);
        const double pg = dot(p, gi);
        double d_mu = 0.0, d_var = 0.0;
        for (std::size_t t = 0; t < length; ++t) {
          const double d_logit = softmax_backward(p, gi, t, pg);
          const double diff = static_cast<double>(t) - mu[i];
          d_mu += d_logit * diff / var;
          d_var += d_logit * diff * diff / (2.0 * var * var);
        }
        if (d_center) (*d_center)[m] += d_mu * 0.5 * t_len;
        if (d_stride) (*d_stride)[m] += d_mu * (static_cast<double>(i) - 0.5 * n + 0.5) * t_len / (n - 1.0);
        if (d_width) (*d_width)[m] += d_var * 2.0 * sigma;
      }
    }
  });
}

Tensor gaussian_filters(const SubEventFilterBank& bank, std::size_t length) {
  Tape tape;
  return gaussian_filters(tape.constant(bank.center), tape.constant(bank.stride), tape.constant(bank.width),
                          bank.gaussians, length)
      .value();
}

double cauchy_location(double center, std::size_t length) {
  return static_cast<double>(length - 1) * (std::tanh(center) + 1.0) / 2.0;
}

double cauchy_scale(double width) { return std::exp(1.0 - 2.0 * std::abs(std::tanh(width))); }

Var cauchy_filters(Var center, Var width, std::size_t length) {
  if (length == 0) throw std::invalid_argument("cauchy_filters: length must be >= 1");
  const std::size_t filters = center.value().size();
  require_vector(center, filters, "cauchy_filters center");
  require_vector(width, filters, "cauchy_filters width");

  // Column-major scratch so each filter is a contiguous row while normalizing.
  std::vector<double> columns(filters * length);
  for (std::size_t n = 0; n < filters; ++n) {
    const double loc = cauchy_location(center.value()[n], length);
    const double scale = cauchy_scale(width.value()[n]);
    std::span<double> col(&columns[n * length], length);
    for (std::size_t t = 0; t < length; ++t) {
      const double u = (static_cast<double>(t) - loc) / scale;
      // pi * gamma^ cancels in the normalization
      col[t] = -std::log1p(u * u);
    }
    normalize_logits(col);
  }
  Tensor out({length, filters});
  for (std::size_t n = 0; n < filters; ++n)
    for (std::size_t t = 0; t < length; ++t) out.at(t, n) = columns[n * length + t];

  return center.tape().record(std::move(out), {center, width},
                              [=](Tape& tape, const Tensor& f, const Tensor& g) {
    Tensor* d_center = tape.grad_sink(center);
    Tensor* d_width = tape.grad_sink(width);
    std::vector<double> p(length), gn(length);
    for (std::size_t n = 0; n < filters; ++n) {
      for (std::size_t t = 0; t < length; ++t) {
        p[t] = f.at(t, n);
        gn[t] = g.at(t, n);
      }
      const double pg = dot(p, gn);
      const double th_x = std::tanh(center.value()[n]);
      const double th_g = std::tanh(width.value()[n]);
      const double loc = static_cast<double>(length - 1) * (th_x + 1.0) / 2.0;
      const double scale = std::exp(1.0 - 2.0 * std::abs(th_g));
      double d_loc = 0.0, d_scale = 0.0;
      for (std::size_t t = 0; t < length; ++t) {
        const double d_logit = softmax_backward(p, gn, t, pg);
        const double u = (static_cast<double>(t) - loc) / scale;
        const double denom = scale * (1.0 + u * u);
        d_loc += d_logit * 2.0 * u / denom;
        d_scale += d_logit * 2.0 * u * u / denom;
      }
      if (d_center) (*d_center)[n] += d_loc * static_cast<double>(length - 1) / 2.0 * (1.0 - th_x * th_x);
      if (d_width) {
        const double sign = th_g > 0.0 ? 1.0 : (th_g < 0.0 ? -1.0 : 0.0);
        (*d_width)[n] += d_scale * scale * (-2.0 * sign * (1.0 - th_g * th_g));
      }
    }
  });
}

Tensor cauchy_filters(const SuperEventFilterBank& bank, std::size_t length) {
  Tape tape;
  return cauchy_filters(tape.constant(bank.center), tape.constant(bank.width), length).value();
}

Var apply_subevents_segmented(Var filters, Var v) {
  if (filters.value().rank() != 3) {
    throw ShapeError("apply_subevents_segmented: filters must be [M x N x T], got " + to_string(filters.shape()));
  }
  const std::size_t rows = filters.value().dim(0) * filters.value().dim(1);
  const std::size_t length = filters.value().dim(2);
  if (v.value().rank() != 2 || v.value().dim(0) != length) {
    throw ShapeError("apply_subevents_segmented: filter length " + std::to_string(length) +
                     " does not match features " + to_string(v.shape()));
  }
  return matmul(reshape(filters, {rows, length}), v);
}

Var apply_subevents_continuous(Var filters, Var v) {
  if (filters.value().rank() != 3) {
    throw ShapeError("apply_subevents_continuous: filters must be [M x N x L], got " + to_string(filters.shape()));
  }
  if (v.value().rank() != 2) {
    throw ShapeError("apply_subevents_continuous: features must be [T x D], got " + to_string(v.shape()));
  }
  const std::size_t rows = filters.value().dim(0) * filters.value().dim(1);
  const std::size_t length = filters.value().dim(2);
  const std::size_t frames = v.value().dim(0), dim = v.value().dim(1);
  if (length > frames) {
    throw ShapeError("apply_subevents_continuous: filter length " + std::to_string(length) +
                     " exceeds sequence length " + std::to_string(frames));
  }
  // source frame of tap k for output frame t
  std::vector<std::size_t> source(frames * length);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = window_start(static_cast<std::ptrdiff_t>(t), length);
    for (std::size_t k = 0; k < length; ++k) {
      source[t * length + k] = static_cast<std::size_t>(
          std::clamp<std::ptrdiff_t>(start + static_cast<std::ptrdiff_t>(k), 0, static_cast<std::ptrdiff_t>(frames) - 1));
    }
  }

  const Tensor& fv = filters.value();
  const Tensor& vv = v.value();
  Tensor out({frames, rows * dim});
  for (std::size_t t = 0; t < frames; ++t) {
    auto dst = out.row(t);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* w = &fv[r * length];
      double* o = &dst[r * dim];
      for (std::size_t k = 0; k < length; ++k) {
        auto src = vv.row(source[t * length + k]);
        for (std::size_t d = 0; d < dim; ++d) o[d] += w[k] * src[d];
      }
    }
  }

  return v.tape().record(std::move(out), {filters, v},
                         [filters, v, rows, length, frames, dim, source = std::move(source)](
                             Tape& tape, const Tensor&, const Tensor& g) {
    const Tensor& fv = filters.value();
    const Tensor& vv = v.value();
    Tensor* df = tape.grad_sink(filters);
    Tensor* dv = tape.grad_sink(v);
    for (std::size_t t = 0; t < frames; ++t) {
      auto gt = g.row(t);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = &gt[r * dim];
        for (std::size_t k = 0; k < length; ++k) {
          const std::size_t s = source[t * length + k];
          if (df) (*df)[r * length + k] += dot(std::span<const double>(gr, dim), vv.row(s));
          if (dv) {
            const double w = fv[r * length + k];
            auto dst = dv->row(s);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += w * gr[d];
          }
        }
      }
    }
  });
}

Var super_event_representation(Var filters, Var attention, Var v) {
  if (filters.value().rank() != 2 || attention.value().rank() != 2 || v.value().rank() != 2) {
    throw ShapeError("super_event_representation: expected rank-2 filters, attention and features");
  }
  if (filters.value().dim(0) != v.value().dim(0) || attention.value().dim(1) != filters.value().dim(1)) {
    throw ShapeError("super_event_representation: filters " + to_string(filters.shape()) + ", attention " +
                     to_string(attention.shape()) + " and features " + to_string(v.shape()) + " disagree");
  }
  return matmul(attention, matmul(transpose(filters), v));
}

}  // namespace tsk

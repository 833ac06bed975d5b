#pragma once

// Learnable temporal filter banks.
//
// Sub-event banks place N strided Gaussians per filter; super-event banks
// use one Cauchy curve per filter plus per-class soft attention. Every
// materialized row is a probability vector over time.

#include <cstddef>
#include <cstdint>
#include <random>

#include "tsk/autodiff.hpp"
#include "tsk/tensor.hpp"

namespace tsk {

/// Added to the squared width so a zero width never divides by zero.
inline constexpr double kGaussianWidthEpsilon = 1e-4;

/// Parameters of M sub-event filters with N Gaussians each. All three
/// vectors have length M and are unconstrained.
struct SubEventFilterBank {
  std::size_t gaussians = 3;
  Tensor center;  // g~ : maps [-1, 1] onto the clip
  Tensor stride;  // delta~
  Tensor width;   // sigma, in frames

  std::size_t filters() const { return center.size(); }

  static SubEventFilterBank initialize(std::size_t filters, std::size_t gaussians, std::mt19937_64& rng);
};

/// Parameters of M Cauchy structure filters and the C x M attention logits.
struct SuperEventFilterBank {
  Tensor center;     // x, length M
  Tensor width;      // gamma, length M
  Tensor attention;  // C x M logits; softmax over M per class

  std::size_t filters() const { return center.size(); }
  std::size_t classes() const { return attention.dim(0); }

  static SuperEventFilterBank initialize(std::size_t filters, std::size_t classes, std::mt19937_64& rng);
};

/// Gaussian means for one filter:
///   g = 0.5 T (g~ + 1),  delta = T / (N - 1) delta~,
///   mu_i = g + (i - 0.5 N + 0.5) delta.
std::vector<double> gaussian_centers(double center, double stride, std::size_t gaussians, std::size_t length);

/// Materialize the sub-event filters as [M x N x T]. Row (m, i) is a
/// normalized Gaussian over t = 0..T-1 with variance width_m^2 + epsilon.
/// Requires T >= 1 and N >= 2.
Var gaussian_filters(Var center, Var stride, Var width, std::size_t gaussians, std::size_t length);
Tensor gaussian_filters(const SubEventFilterBank& bank, std::size_t length);

/// Cauchy location and scale after the squashing transforms:
///   x^ = (T - 1)(tanh x + 1) / 2,   gamma^ = exp(1 - 2 |tanh gamma|).
double cauchy_location(double center, std::size_t length);
double cauchy_scale(double width);

/// Materialize the super-event filters as [T x M]; column n is the
/// normalized density 1 / (pi gamma^ (1 + ((t - x^) / gamma^)^2)).
Var cauchy_filters(Var center, Var width, std::size_t length);
Tensor cauchy_filters(const SuperEventFilterBank& bank, std::size_t length);

/// Row-stacked matrix product of filters [M x N x T] with v [T x D],
/// giving [(M N) x D].
Var apply_subevents_segmented(Var filters, Var v);

/// Convolve every filter row of [M x N x L] with every channel of v [T x D]
/// using centered, edge-replicated windows. Output is [T x (M N D)] with the
/// channel index fastest: column (r, d) = r * D + d.
Var apply_subevents_continuous(Var filters, Var v);

/// S = A (F^T v) for filters F [T x M], attention A [C x M] (already
/// softmax-normalized) and v [T x D]; result is [C x D].
Var super_event_representation(Var filters, Var attention, Var v);

}  // namespace tsk

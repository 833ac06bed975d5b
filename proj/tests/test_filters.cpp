#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "tsk/filters.hpp"

using namespace tsk;
using tsk::test::gradcheck;
using tsk::test::probe;
using tsk::test::random_tensor;

namespace {

void check_rows_normalized(const Tensor& rows, std::size_t width) {
  for (std::size_t r = 0; r < rows.size() / width; ++r) {
    double total = 0.0;
    for (std::size_t t = 0; t < width; ++t) {
      const double w = rows[r * width + t];
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

Tensor transpose_of(const Tensor& m) {
  Tensor out({m.dim(1), m.dim(0)});
  for (std::size_t i = 0; i < m.dim(0); ++i)
    for (std::size_t j = 0; j < m.dim(1); ++j) out.at(j, i) = m.at(i, j);
  return out;
}

}  // namespace

TEST_CASE("strided Gaussian centers") {
  auto mu = gaussian_centers(0.0, 0.5, 2, 10);
  REQUIRE(mu.size() == 2);
  CHECK(mu[0] == doctest::Approx(2.5));
  CHECK(mu[1] == doctest::Approx(7.5));
  mu = gaussian_centers(0.0, 1.0, 3, 5);
  CHECK(mu[0] == doctest::Approx(0.0));
  CHECK(mu[1] == doctest::Approx(2.5));
  CHECK(mu[2] == doctest::Approx(5.0));
}

TEST_CASE("Gaussian filter rows are probability vectors") {
  std::mt19937_64 rng(11);
  for (std::size_t T : {1u, 4u, 16u, 128u}) {
    for (int trial = 0; trial < 20; ++trial) {
      SubEventFilterBank bank{3, random_tensor(rng, {2}, -3, 3), random_tensor(rng, {2}, -3, 3),
                              random_tensor(rng, {2}, -20, 20)};
      const Tensor f = gaussian_filters(bank, T);
      REQUIRE(f.shape() == Shape{2, 3, T});
      check_rows_normalized(f, T);
    }
  }
  // Zero width collapses onto the nearest frame without dividing by zero.
  SubEventFilterBank sharp{2, Tensor::vector({0.0}), Tensor::vector({0.5}), Tensor::vector({0.0})};
  const Tensor f = gaussian_filters(sharp, 10);
  CHECK(f.all_finite());
  check_rows_normalized(f, 10);
}

TEST_CASE("Gaussian rows follow the Gaussian shape") {
  SubEventFilterBank bank{2, Tensor::vector({0.1}), Tensor::vector({0.3}), Tensor::vector({1.7})};
  const std::size_t T = 12;
  const Tensor f = gaussian_filters(bank, T);
  const auto mu = gaussian_centers(0.1, 0.3, 2, T);
  const double var = 1.7 * 1.7 + kGaussianWidthEpsilon;
  for (std::size_t i = 0; i < 2; ++i) {
    double z = 0.0;
    for (std::size_t t = 0; t < T; ++t) z += std::exp(-0.5 * (t - mu[i]) * (t - mu[i]) / var);
    for (std::size_t t = 0; t < T; ++t) {
      CHECK(f.at(0, i, t) == doctest::Approx(std::exp(-0.5 * (t - mu[i]) * (t - mu[i]) / var) / z).epsilon(1e-12));
    }
  }
}

TEST_CASE("gaussian_filters gradient") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor g = random_tensor(rng, {2}), d = random_tensor(rng, {2}), s = random_tensor(rng, {2}, 0.5, 3.0);
    CHECK(gradcheck({g, d, s}, [](Tape&, std::span<const Var> x) {
            return probe(gaussian_filters(x[0], x[1], x[2], 3, 9));
          }) <= 1e-4);
  }
}

TEST_CASE("Cauchy transforms") {
  CHECK(cauchy_location(0.0, 11) == doctest::Approx(5.0));
  CHECK(cauchy_scale(0.0) == doctest::Approx(std::numbers::e));
  CHECK(cauchy_scale(40.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(cauchy_scale(-40.0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("Cauchy filter columns are probability vectors with the Cauchy shape") {
  std::mt19937_64 rng(13);
  for (std::size_t T : {1u, 4u, 16u, 128u}) {
    for (int trial = 0; trial < 20; ++trial) {
      SuperEventFilterBank bank{random_tensor(rng, {3}, -4, 4), random_tensor(rng, {3}, -4, 4),
                                random_tensor(rng, {2, 3})};
      const Tensor f = cauchy_filters(bank, T);
      REQUIRE(f.shape() == Shape{T, 3});
      check_rows_normalized(transpose_of(f), T);
    }
  }
  SuperEventFilterBank bank{Tensor::vector({0.3}), Tensor::vector({-0.2}), Tensor::matrix({{0.0}})};
  const std::size_t T = 9;
  const Tensor f = cauchy_filters(bank, T);
  const double x = cauchy_location(0.3, T), g = cauchy_scale(-0.2);
  double z = 0.0;
  for (std::size_t t = 0; t < T; ++t) z += 1.0 / (1.0 + std::pow((t - x) / g, 2));
  for (std::size_t t = 0; t < T; ++t) CHECK(f.at(t, 0) == doctest::Approx(1.0 / (1.0 + std::pow((t - x) / g, 2)) / z));
}

TEST_CASE("cauchy_filters gradient") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor x = random_tensor(rng, {3}), g = random_tensor(rng, {3});
    CHECK(gradcheck({x, g}, [](Tape&, std::span<const Var> v) { return probe(cauchy_filters(v[0], v[1], 11)); }) <=
          1e-4);
  }
}

TEST_CASE("apply_subevents_segmented: delta and uniform filters") {
  std::mt19937_64 rng(15);
  const std::size_t T = 6, D = 4;
  const Tensor V = random_tensor(rng, {T, D});
  Tensor F({2, 1, T});
  F.at(0, 0, 3) = 1.0;
  for (std::size_t t = 0; t < T; ++t) F.at(1, 0, t) = 1.0 / T;
  Tape tape;
  const Tensor out = apply_subevents_segmented(tape.constant(F), tape.constant(V)).value();
  REQUIRE(out.shape() == Shape{2, D});
  for (std::size_t d = 0; d < D; ++d) {
    CHECK(out.at(0, d) == V.at(3, d));
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += V.at(t, d) / T;
    CHECK(out.at(1, d) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("apply_subevents_segmented matches a loop oracle") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t M = 1 + rng() % 3, N = 1 + rng() % 3, T = 1 + rng() % 9, D = 1 + rng() % 4;
    const Tensor F = random_tensor(rng, {M, N, T}), V = random_tensor(rng, {T, D});
    Tape tape;
    const Tensor out = apply_subevents_segmented(tape.constant(F), tape.constant(V)).value();
    for (std::size_t r = 0; r < M * N; ++r)
      for (std::size_t d = 0; d < D; ++d) {
        double expect = 0.0;
        for (std::size_t t = 0; t < T; ++t) expect += F[r * T + t] * V.at(t, d);
        CHECK(std::abs(out.at(r, d) - expect) <= 1e-10);
      }
    CHECK(gradcheck({F, V}, [](Tape&, std::span<const Var> x) { return probe(apply_subevents_segmented(x[0], x[1])); }) <=
          1e-4);
  }
}

TEST_CASE("apply_subevents_continuous: identity and constant cases") {
  std::mt19937_64 rng(17);
  const Tensor V = random_tensor(rng, {5, 2});
  Tape tape;
  const Tensor id = apply_subevents_continuous(tape.constant(Tensor({1, 1, 1}, {1.0})), tape.constant(V)).value();
  CHECK(id == V);
  const Tensor constant = apply_subevents_continuous(tape.constant(Tensor::full({1, 1, 4}, 0.25)),
                                                     tape.constant(Tensor::full({7, 1}, 3.0)))
                              .value();
  for (double x : constant.data()) CHECK(x == doctest::Approx(3.0));
  CHECK_THROWS_AS(apply_subevents_continuous(tape.constant(Tensor::full({1, 1, 8}, 0.1)), tape.constant(V)), ShapeError);
}

TEST_CASE("apply_subevents_continuous matches a sliding dot-product oracle") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t M = 1 + rng() % 2, N = 1 + rng() % 3, L = 1 + rng() % 5, T = L + rng() % 6, D = 1 + rng() % 3;
    const Tensor F = random_tensor(rng, {M, N, L}), V = random_tensor(rng, {T, D});
    Tape tape;
    const Tensor out = apply_subevents_continuous(tape.constant(F), tape.constant(V)).value();
    REQUIRE(out.shape() == Shape{T, M * N * D});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t r = 0; r < M * N; ++r)
        for (std::size_t d = 0; d < D; ++d) {
          double expect = 0.0;
          for (std::size_t l = 0; l < L; ++l) {
            const auto s = std::clamp<std::ptrdiff_t>(window_start(static_cast<std::ptrdiff_t>(t), L) +
                                                          static_cast<std::ptrdiff_t>(l),
                                                      0, static_cast<std::ptrdiff_t>(T) - 1);
            expect += F[r * L + l] * V.at(static_cast<std::size_t>(s), d);
          }
          CHECK(std::abs(out.at(t, r * D + d) - expect) <= 1e-10);
        }
    CHECK(gradcheck({F, V}, [](Tape&, std::span<const Var> x) { return probe(apply_subevents_continuous(x[0], x[1])); }) <=
          1e-4);
  }
}

TEST_CASE("super_event_representation: uniform and delta filters") {
  std::mt19937_64 rng(19);
  const std::size_t T = 5, D = 3, C = 2;
  const Tensor V = random_tensor(rng, {T, D});
  Tape tape;
  const Tensor uniform = super_event_representation(tape.constant(Tensor::full({T, 1}, 1.0 / T)),
                                                    tape.constant(Tensor::full({C, 1}, 1.0)), tape.constant(V))
                             .value();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < D; ++d) {
      double mean = 0.0;
      for (std::size_t t = 0; t < T; ++t) mean += V.at(t, d) / T;
      CHECK(uniform.at(c, d) == doctest::Approx(mean).epsilon(1e-12));
    }
  Tensor delta({T, 1});
  delta.at(2, 0) = 1.0;
  const Tensor s = super_event_representation(tape.constant(delta), tape.constant(Tensor::full({C, 1}, 1.0)),
                                              tape.constant(V))
                       .value();
  for (std::size_t d = 0; d < D; ++d) CHECK(s.at(1, d) == V.at(2, d));
}

TEST_CASE("super_event_representation matches a triple-loop oracle") {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t T = 1 + rng() % 8, M = 1 + rng() % 3, C = 1 + rng() % 3, D = 1 + rng() % 4;
    const Tensor F = random_tensor(rng, {T, M}), A = random_tensor(rng, {C, M}), V = random_tensor(rng, {T, D});
    Tape tape;
    const Tensor S = super_event_representation(tape.constant(F), tape.constant(A), tape.constant(V)).value();
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t d = 0; d < D; ++d) {
        double expect = 0.0;
        for (std::size_t m = 0; m < M; ++m)
          for (std::size_t t = 0; t < T; ++t) expect += A.at(c, m) * F.at(t, m) * V.at(t, d);
        CHECK(std::abs(S.at(c, d) - expect) <= 1e-10);
      }
    CHECK(gradcheck({F, A, V}, [](Tape&, std::span<const Var> x) {
            return probe(super_event_representation(x[0], x[1], x[2]));
          }) <= 1e-4);
  }
}

TEST_CASE("bank initializers are seeded") {
  std::mt19937_64 a(5), b(5);
  const auto s1 = SubEventFilterBank::initialize(3, 3, a), s2 = SubEventFilterBank::initialize(3, 3, b);
  CHECK(s1.center == s2.center);
  CHECK(s1.width == Tensor::full({3}, 0.5));
  const auto p = SuperEventFilterBank::initialize(3, 4, a);
  CHECK(p.attention.shape() == Shape{4, 3});
  for (double x : p.attention.data()) CHECK(std::abs(x) <= 0.1);
}

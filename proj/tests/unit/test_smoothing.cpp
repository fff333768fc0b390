#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "smoothar/error.hpp"
#include "smoothar/smoothing.hpp"

using namespace smoothar;

TEST_CASE("closed-form log densities") {
  const double zero = 0.0, one = 1.0;
  CHECK(SmoothingKernel(KernelFamily::Gaussian, 1.0, 1).log_pdf(std::span(&zero, 1), std::span(&zero, 1)) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(SmoothingKernel(KernelFamily::Laplace, 1.0, 1).log_pdf(std::span(&one, 1), std::span(&zero, 1)) ==
        doctest::Approx(-1.0 - std::log(2.0)).epsilon(1e-15));
  CHECK(SmoothingKernel(KernelFamily::Uniform, 2.0, 1).log_pdf_1d(1.5) == doctest::Approx(-std::log(4.0)));
}

TEST_CASE("uniform kernel flags out-of-support points") {
  const SmoothingKernel k(KernelFamily::Uniform, 0.5, 2);
  const double x[2] = {0.0, 0.0}, in[2] = {0.4, -0.5}, out[2] = {0.4, 0.51};
  CHECK(k.in_support(in, x));
  CHECK_FALSE(k.in_support(out, x));
  CHECK(is_out_of_support(k.log_pdf(out, x)));
  CHECK_FALSE(is_out_of_support(k.log_pdf(in, x)));
}

TEST_CASE("symmetric and stationary for every family") {
  Rng rng(1);
  for (const auto family : {KernelFamily::Gaussian, KernelFamily::Laplace, KernelFamily::Uniform}) {
    const SmoothingKernel k(family, 0.8, 3);
    for (int trial = 0; trial < 200; ++trial) {
      double u[3], v[3], u2[3], v2[3];
      const double shift = rng.uniform(-5.0, 5.0);
      for (int i = 0; i < 3; ++i) {
        u[i] = rng.uniform(-2.0, 2.0);
        v[i] = u[i] + rng.uniform(-0.75, 0.75);
        u2[i] = u[i] + shift;
        v2[i] = v[i] + shift;
      }
      CHECK(k.log_pdf(u, v) == k.log_pdf(v, u));
      CHECK(k.log_pdf(u, v) == doctest::Approx(k.log_pdf(u2, v2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("entropy and second moment closed forms") {
  CHECK(SmoothingKernel(KernelFamily::Gaussian, 0.3, 2).entropy() == doctest::Approx(0.429932).epsilon(1e-6));
  CHECK(SmoothingKernel(KernelFamily::Uniform, 0.5, 1).entropy() == doctest::Approx(0.0));
  CHECK(SmoothingKernel(KernelFamily::Laplace, 0.5, 1).entropy() == doctest::Approx(1.0));
  CHECK(SmoothingKernel(KernelFamily::Gaussian, 0.5, 1).second_moment() == doctest::Approx(0.25));
  CHECK(SmoothingKernel(KernelFamily::Laplace, 1.0, 1).second_moment() == doctest::Approx(2.0));
  CHECK(SmoothingKernel(KernelFamily::Uniform, 3.0, 1).second_moment() == doctest::Approx(3.0));
  // quadrature oracles for the two non-trivial moments
  const double lap = oracle::trapezoid([](double z) { return z * z * 0.5 * std::exp(-std::abs(z)); }, -60.0, 60.0, 600000);
  CHECK(lap == doctest::Approx(2.0).epsilon(1e-6));
  const double uni = oracle::trapezoid([](double z) { return z * z / 6.0; }, -3.0, 3.0, 60000);
  CHECK(uni == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("Monte-Carlo entropy and second moment agree with the closed forms") {
  Rng rng(2);
  for (const auto family : {KernelFamily::Gaussian, KernelFamily::Laplace, KernelFamily::Uniform}) {
    const SmoothingKernel k(family, 0.7, 1);
    const int m = 1000000;
    double neg_log = 0.0, sq = 0.0;
    for (int i = 0; i < m; ++i) {
      const double e = k.sample_noise(rng);
      neg_log -= k.log_pdf_1d(e);
      sq += e * e;
    }
    CHECK(std::abs(neg_log / m - k.entropy()) < 0.01);
    CHECK(std::abs(sq / m / k.second_moment() - 1.0) < 0.01);
  }
}

TEST_CASE("sampling") {
  Rng rng(3);
  const Tensor x = Tensor::matrix({{1.0, -2.0}, {0.5, 0.25}});
  const Tensor near = SmoothingKernel(KernelFamily::Gaussian, 1e-12, 2).sample(x, rng);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(near[i] - x[i]) < 1e-10);
  CHECK(SmoothingKernel(KernelFamily::Gaussian, 0.0, 2).sample(x, rng) == x);

  const SmoothingKernel g(KernelFamily::Gaussian, 0.3, 1);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double e = g.sample_noise(rng);
    s += e;
    s2 += e * e;
  }
  const double var = s2 / 1e5 - (s / 1e5) * (s / 1e5);
  CHECK(std::abs(var - 0.09) < 0.005);

  const SmoothingKernel u(KernelFamily::Uniform, 1.0, 1);
  for (int i = 0; i < 10000; ++i) {
    const double e = u.sample_noise(rng);
    CHECK((e >= -1.0 && e <= 1.0));
  }
  CHECK_THROWS_AS(g.sample(x, rng), DimensionError);
}

TEST_CASE("invalid kernels") {
  CHECK_THROWS_AS(SmoothingKernel(KernelFamily::Gaussian, -1.0, 1), ConfigError);
  CHECK_THROWS_AS(SmoothingKernel(KernelFamily::Gaussian, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(kernel_family_from_string("cauchy"), ConfigError);
  CHECK(kernel_family_from_string(to_string(KernelFamily::Laplace)) == KernelFamily::Laplace);
}

TEST_CASE("sigma heuristic") {
  CHECK(sigma_heuristic(Tensor::matrix({{0.0}, {1.0}}), 0) == doctest::Approx(0.5));
  // distances {1,1,1,1,√2,√2}; the lower middle element is 1
  const Tensor corners = Tensor::matrix({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
  CHECK(sigma_heuristic(corners, 0) == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
  // duplicates add zero distances: {0,0,1,1,1,1} keeps the lower middle at 1
  CHECK(sigma_heuristic(Tensor::matrix({{0.0}, {0.0}, {1.0}, {1.0}}), 0) == doctest::Approx(0.5));
  // three copies of each point: 6 zeros and 9 ones, the median is still 1
  CHECK(sigma_heuristic(Tensor::matrix({{0.0}, {0.0}, {0.0}, {1.0}, {1.0}, {1.0}}), 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(sigma_heuristic(Tensor::matrix({{0.0}}), 0), ContractError);
}

TEST_CASE("sigma heuristic subsamples large datasets deterministically") {
  Rng rng(4);
  Tensor big(Shape{5000, 2});
  for (std::size_t i = 0; i < big.numel(); ++i) big[i] = rng.normal();
  const double a = sigma_heuristic(big, 9);
  CHECK(a == sigma_heuristic(big, 9));
  // median distance between two standard 2-d normals is sqrt(2 * 2 ln 2)
  CHECK(a == doctest::Approx(std::sqrt(4.0 * std::log(2.0)) / (2.0 * std::sqrt(2.0))).epsilon(0.03));
}

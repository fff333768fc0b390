#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "smoothar/datasets.hpp"
#include "smoothar/error.hpp"

using namespace smoothar;

namespace {

double density(const Dataset& ds, double a, double b) {
  const double x[2] = {a, b};
  return std::exp(ds.log_density(x));
}

double density1(const Dataset& ds, double a) { return std::exp(ds.log_density(std::span<const double>(&a, 1))); }

double mass_2d(const Dataset& ds, double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m += density(ds, lo + (i + 0.5) * h, lo + (j + 0.5) * h);
  return m * h * h;
}

}  // namespace

TEST_CASE("generators are deterministic and finite") {
  for (const auto& name : dataset_names()) {
    const Dataset a = generate({name, 500, 42, {}});
    const Dataset b = generate({name, 500, 42, {}});
    CHECK(a.points == b.points);
    CHECK(a.points.all_finite());
    CHECK(a.size() == 500);
    CHECK(a.has_density());
    CHECK_FALSE(generate({name, 500, 43, {}}).points == a.points);
  }
  CHECK_THROWS_AS(generate({"spiral", 10, 0, {}}), ConfigError);
}

TEST_CASE("n = 0 yields an empty, valid dataset") {
  const Dataset ds = gen_olympics(0, 1);
  CHECK(ds.size() == 0);
  CHECK(ds.dim() == 2);
}

TEST_CASE("two-mode data") {
  const Dataset ds = gen_two_mode_1d(1000000, 1);
  double mean = 0.0;
  for (double v : ds.points.values()) mean += v;
  CHECK(std::abs(mean / 1e6) < 0.002);
  CHECK(density1(ds, 0.3) == doctest::Approx(0.5 * oracle::normal_pdf(0.3, -0.3, 0.1) + 0.5 * oracle::normal_pdf(0.3, 0.3, 0.1)));
  CHECK(density1(ds, 0.3) == doctest::Approx(1.994712).epsilon(1e-6));
}

TEST_CASE("gaussian convolution of a mixture") {
  const auto smoothed = convolve_with_gaussian(two_mode_preset(), 0.3);
  for (const auto& m : smoothed) CHECK(m.stddev == doctest::Approx(std::sqrt(0.1)));
  // compare against direct quadrature of the convolution integral
  for (double x : {-0.5, 0.0, 0.2, 1.0}) {
    const double direct = oracle::trapezoid(
        [&](double y) {
          return oracle::normal_pdf(x, y, 0.3) * (0.5 * oracle::normal_pdf(y, -0.3, 0.1) + 0.5 * oracle::normal_pdf(y, 0.3, 0.1));
        },
        -4.0, 4.0, 40000);
    CHECK(std::exp(gaussian_mixture_log_density(smoothed, x)) == doctest::Approx(direct).epsilon(1e-8));
  }
}

TEST_CASE("mixture score matches the derivative of the log density") {
  const auto modes = ten_mode_preset();
  for (double x : {-2.3, -1.0, 0.01, 0.4, 2.0}) {
    const double h = 1e-6;
    const double fd = (gaussian_mixture_log_density(modes, x + h) - gaussian_mixture_log_density(modes, x - h)) / (2 * h);
    CHECK(gaussian_mixture_score(modes, x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("multimode data") {
  const Dataset single = gen_multimode_1d({{0.0, 1.0, 1.0}}, 1000000, 2);
  double s = 0.0, s2 = 0.0;
  for (double v : single.points.values()) {
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s2 / 1e6 - (s / 1e6) * (s / 1e6) - 1.0) < 0.01);

  const Dataset ten = generate({"multimode_1d", 10, 0, {}});
  int maxima = 0;
  const int n = 10000;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = density1(ten, -3.0 + 6.0 * i / (n - 1));
  for (int i = 1; i + 1 < n; ++i) maxima += grid[i] > grid[i - 1] && grid[i] > grid[i + 1];
  CHECK(maxima == 10);

  const Dataset unnorm = gen_multimode_1d({{-1.0, 0.3, 2.0}, {1.0, 0.5, 5.0}}, 10, 3);
  CHECK(oracle::trapezoid([&](double x) { return density1(unnorm, x); }, -10.0, 10.0, 20000) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(gen_multimode_1d({{0.0, -1.0, 1.0}}, 10, 0), ContractError);
}

TEST_CASE("ring") {
  const Dataset ds = gen_ring(1000000, 3);
  double r = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) r += std::hypot(ds.points.at(i, 0), ds.points.at(i, 1));
  CHECK(std::abs(r / 1e6 - 1.0) < 0.001);
  CHECK(density(ds, 1.0, 0.0) == doctest::Approx(oracle::normal_pdf(1.0, 1.0, 0.01) / (2 * std::numbers::pi)));
  CHECK(density(ds, 1.0, 0.0) == doctest::Approx(6.349364).epsilon(1e-6));
  CHECK(density(ds, 0.5, 0.5) < 1e-100);
  CHECK(ds.log_density(std::vector<double>{0.0, 0.0}) == -INFINITY);
  CHECK_THROWS_AS(ds.log_density(std::vector<double>{0.0}), DimensionError);
}

TEST_CASE("rings") {
  const Dataset ds = gen_rings(1000000, 4);
  std::vector<int> hist(120, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto bin = static_cast<std::size_t>(std::hypot(ds.points.at(i, 0), ds.points.at(i, 1)) / 0.01);
    if (bin < hist.size()) ++hist[bin];
  }
  std::vector<double> peaks;
  for (std::size_t b = 2; b + 2 < hist.size(); ++b) {
    bool top = hist[b] > 1000;
    for (std::size_t o = b - 2; o <= b + 2; ++o) top = top && (o == b || hist[b] > hist[o]);
    if (top) peaks.push_back((b + 0.5) * 0.01);
  }
  REQUIRE(peaks.size() == 4);
  const double radii[4] = {0.25, 0.5, 0.75, 1.0};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(peaks[k] - radii[k]) <= 0.02);

  CHECK(density(ds, 0.25, 0.0) == doctest::Approx(3.175).epsilon(1e-3));
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const double a = rng.uniform(-1.2, 1.2), b = rng.uniform(-1.2, 1.2), th = rng.uniform(0.0, 6.28);
    const double ra = std::cos(th) * a - std::sin(th) * b, rb = std::sin(th) * a + std::cos(th) * b;
    const double p = density(ds, a, b), q = density(ds, ra, rb);
    CHECK(std::abs(p - q) <= 1e-12 * std::max(1.0, p));
  }
  CHECK(mass_2d(ds, -1.5, 1.5, 500) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("olympics") {
  const Dataset ds = gen_olympics(1000000, 6);
  CHECK(density(ds, -2.2, 1.5) == doctest::Approx(0.2 * oracle::normal_pdf(1.0, 1.0, 0.05) / (2 * std::numbers::pi)).epsilon(1e-4));
  CHECK(density(ds, -2.2, 1.5) == doctest::Approx(0.253974).epsilon(1e-4));
  // the two bands of ring centres show up in the x2 marginal
  int upper = 0, lower = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = ds.points.at(i, 1);
    upper += y > 0.4 && y < 0.6;
    lower += y > -0.6 && y < -0.4;
  }
  CHECK(upper > 0);
  CHECK(lower > 0);
  CHECK(mass_2d(ds, -4.0, 4.0, 500) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("checkerboard") {
  const Dataset ds = gen_checkerboard(1000000, 7);
  int in_cell = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto a = static_cast<long>(std::floor(ds.points.at(i, 0) + 4.0));
    const auto b = static_cast<long>(std::floor(ds.points.at(i, 1) + 4.0));
    CHECK((a + b) % 2 == 0);
    in_cell += a == 4 && b == 4;
  }
  CHECK(std::abs(in_cell / 1e6 - 1.0 / 32.0) < 0.003);
  // (0.5, 0.5) lies in cell (4, 4), which is black
  CHECK(density(ds, 0.5, 0.5) == doctest::Approx(1.0 / 32.0));
  CHECK(density(ds, 1.5, 0.5) == 0.0);
  CHECK(mass_2d(ds, -5.0, 5.0, 500) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("held-out split") {
  const Dataset ds = gen_ring(1000, 8);
  const Split a = split_holdout(ds.points, 1);
  CHECK(a.heldout.rows() == 100);
  CHECK(a.train.rows() == 900);
  CHECK(split_holdout(ds.points, 1).heldout == a.heldout);
  double total = 0.0, parts = 0.0;
  for (double v : ds.points.values()) total += v;
  for (double v : a.train.values()) parts += v;
  for (double v : a.heldout.values()) parts += v;
  CHECK(parts == doctest::Approx(total));
}

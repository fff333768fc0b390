#include "smoothar/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "smoothar/error.hpp"
#include "smoothar/rng.hpp"

namespace smoothar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_log_pdf(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> normalized_weights(std::span<const GaussianMode> modes) {
  if (modes.empty()) throw ContractError("gaussian mixture needs at least one mode");
  double total = 0.0;
  for (const auto& m : modes) {
    if (!(m.weight > 0.0) || !(m.stddev > 0.0)) throw ContractError("gaussian mixture modes need positive weight and std");
    total += m.weight;
  }
  std::vector<double> w;
  for (const auto& m : modes) w.push_back(m.weight / total);
  return w;
}

void validate_rings(std::span<const RingComponent> rings) {
  if (rings.empty()) throw ContractError("ring mixture needs at least one ring");
  for (const auto& r : rings)
    if (!(r.stddev > 0.0)) throw ContractError("ring radial std must be positive");
}

Dataset sample_rings(std::string name, std::vector<RingComponent> rings, std::size_t n, std::uint64_t seed) {
  validate_rings(rings);
  Rng rng(seed);
  Tensor points(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const RingComponent& ring = rings.size() == 1 ? rings.front() : rings[rng.index(rings.size())];
    const double r = rng.normal(ring.radius, ring.stddev);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    points.at(i, 0) = ring.cx + r * std::cos(theta);
    points.at(i, 1) = ring.cy + r * std::sin(theta);
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.seed = seed;
  ds.points = std::move(points);
  ds.log_density = [rings = std::move(rings)](std::span<const double> x) { return ring_mixture_log_density(rings, x); };
  return ds;
}

}  // namespace

std::vector<GaussianMode> ten_mode_preset() {
  std::vector<GaussianMode> modes;
  for (int k = 0; k < 10; ++k) modes.push_back({-2.25 + 0.5 * k, 0.05, 1.0});
  return modes;
}

std::vector<GaussianMode> six_mode_preset() {
  std::vector<GaussianMode> modes;
  for (int k = 0; k < 6; ++k) modes.push_back({-2.5 + 1.0 * k, 0.1, 1.0});
  return modes;
}

std::vector<GaussianMode> two_mode_preset() { return {{-0.3, 0.1, 0.5}, {0.3, 0.1, 0.5}}; }

double gaussian_mixture_log_density(std::span<const GaussianMode> modes, double x) {
  const std::vector<double> w = normalized_weights(modes);
  std::vector<double> terms(modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k) terms[k] = std::log(w[k]) + normal_log_pdf(x, modes[k].mean, modes[k].stddev);
  return log_sum_exp(terms);
}

double gaussian_mixture_score(std::span<const GaussianMode> modes, double x) {
  const std::vector<double> w = normalized_weights(modes);
  std::vector<double> terms(modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k) terms[k] = std::log(w[k]) + normal_log_pdf(x, modes[k].mean, modes[k].stddev);
  const double total = log_sum_exp(terms);
  double score = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double s2 = modes[k].stddev * modes[k].stddev;
    score += std::exp(terms[k] - total) * (modes[k].mean - x) / s2;
  }
  return score;
}

std::vector<GaussianMode> convolve_with_gaussian(std::span<const GaussianMode> modes, double sigma) {
  std::vector<GaussianMode> out(modes.begin(), modes.end());
  for (auto& m : out) m.stddev = std::sqrt(m.stddev * m.stddev + sigma * sigma);
  return out;
}

double ring_mixture_log_density(std::span<const RingComponent> rings, std::span<const double> x) {
  if (x.size() != 2) throw DimensionError("ring densities are 2-d, got " + std::to_string(x.size()) + " values");
  std::vector<double> terms(rings.size());
  const double log_weight = -std::log(static_cast<double>(rings.size()));
  for (std::size_t k = 0; k < rings.size(); ++k) {
    const double r = std::hypot(x[0] - rings[k].cx, x[1] - rings[k].cy);
    terms[k] = r > 0.0 ? log_weight + normal_log_pdf(r, rings[k].radius, rings[k].stddev) -
                             std::log(2.0 * std::numbers::pi * r)
                       : -kInf;
  }
  return log_sum_exp(terms);
}

std::vector<RingComponent> ring_geometry() { return {{0.0, 0.0, 1.0, 0.01}}; }

std::vector<RingComponent> rings_geometry() {
  return {{0.0, 0.0, 0.25, 0.02}, {0.0, 0.0, 0.5, 0.02}, {0.0, 0.0, 0.75, 0.02}, {0.0, 0.0, 1.0, 0.02}};
}

std::vector<RingComponent> olympics_geometry() {
  return {{-2.2, 0.5, 1.0, 0.05}, {0.0, 0.5, 1.0, 0.05}, {2.2, 0.5, 1.0, 0.05}, {-1.1, -0.5, 1.0, 0.05}, {1.1, -0.5, 1.0, 0.05}};
}

Dataset gen_multimode_1d(std::vector<GaussianMode> modes, std::size_t n, std::uint64_t seed) {
  const std::vector<double> w = normalized_weights(modes);
  Rng rng(seed);
  Tensor points(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t k = modes.size() - 1;
    double cumulative = 0.0;
    for (std::size_t j = 0; j < modes.size(); ++j) {
      cumulative += w[j];
      if (u < cumulative) {
        k = j;
        break;
      }
    }
    points[i] = rng.normal(modes[k].mean, modes[k].stddev);
  }
  Dataset ds;
  ds.name = "multimode_1d";
  ds.seed = seed;
  ds.points = std::move(points);
  ds.log_density = [modes = std::move(modes)](std::span<const double> x) {
    if (x.size() != 1) throw DimensionError("1-d density given " + std::to_string(x.size()) + " values");
    return gaussian_mixture_log_density(modes, x[0]);
  };
  return ds;
}

Dataset gen_two_mode_1d(std::size_t n, std::uint64_t seed) {
  Dataset ds = gen_multimode_1d(two_mode_preset(), n, seed);
  ds.name = "two_mode_1d";
  return ds;
}

Dataset gen_ring(std::size_t n, std::uint64_t seed) { return sample_rings("ring", ring_geometry(), n, seed); }
Dataset gen_rings(std::size_t n, std::uint64_t seed) { return sample_rings("rings", rings_geometry(), n, seed); }
Dataset gen_olympics(std::size_t n, std::uint64_t seed) { return sample_rings("olympics", olympics_geometry(), n, seed); }

Dataset gen_checkerboard(std::size_t n, std::uint64_t seed) {
  // (i, j) cells with i + j even, row-major
  std::vector<std::pair<int, int>> black;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if ((i + j) % 2 == 0) black.emplace_back(i, j);
  Rng rng(seed);
  Tensor points(Shape{n, 2});
  for (std::size_t k = 0; k < n; ++k) {
    const auto [i, j] = black[rng.index(black.size())];
    points.at(k, 0) = -4.0 + i + rng.uniform();
    points.at(k, 1) = -4.0 + j + rng.uniform();
  }
  Dataset ds;
  ds.name = "checkerboard";
  ds.seed = seed;
  ds.points = std::move(points);
  ds.log_density = [](std::span<const double> x) {
    if (x.size() != 2) throw DimensionError("checkerboard density is 2-d");
    if (x[0] < -4.0 || x[0] >= 4.0 || x[1] < -4.0 || x[1] >= 4.0) return -kInf;
    const auto i = static_cast<long>(std::floor(x[0] + 4.0));
    const auto j = static_cast<long>(std::floor(x[1] + 4.0));
    return (i + j) % 2 == 0 ? -std::log(32.0) : -kInf;
  };
  return ds;
}

std::vector<std::string> dataset_names() {
  return {"two_mode_1d", "multimode_1d", "ring", "rings", "olympics", "checkerboard"};
}

Dataset generate(const DatasetSpec& spec) {
  if (spec.name == "two_mode_1d") return gen_two_mode_1d(spec.n, spec.seed);
  if (spec.name == "multimode_1d") return gen_multimode_1d(spec.modes.empty() ? ten_mode_preset() : spec.modes, spec.n, spec.seed);
  if (spec.name == "ring") return gen_ring(spec.n, spec.seed);
  if (spec.name == "rings") return gen_rings(spec.n, spec.seed);
  if (spec.name == "olympics") return gen_olympics(spec.n, spec.seed);
  if (spec.name == "checkerboard") return gen_checkerboard(spec.n, spec.seed);
  throw ConfigError("unknown dataset '" + spec.name + "'");
}

Split split_holdout(const Tensor& points, std::uint64_t seed, double heldout_fraction) {
  if (points.rank() != 2) throw DimensionError("split expects [N, D] points");
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(Rng::derive(seed, 0x5eed));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  const auto n_held = static_cast<std::size_t>(std::floor(heldout_fraction * static_cast<double>(n)));
  Split split{Tensor(Shape{n - n_held, d}), Tensor(Shape{n_held, d})};
  for (std::size_t k = 0; k < n; ++k) {
    Tensor& dst = k < n_held ? split.heldout : split.train;
    const std::size_t row = k < n_held ? k : k - n_held;
    std::copy_n(points.row(idx[k]).begin(), d, dst.row(row).begin());
  }
  return split;
}

}  // namespace smoothar

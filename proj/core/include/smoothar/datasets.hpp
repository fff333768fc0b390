#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smoothar/tensor.hpp"

namespace smoothar {

using LogDensityFn = std::function<double(std::span<const double>)>;

// Samples from one synthetic distribution together with its exact log
// density (when one is available).
struct Dataset {
  std::string name;
  std::uint64_t seed = 0;
  Tensor points;  // [N, D]
  LogDensityFn log_density;

  std::size_t size() const { return points.rows(); }
  std::size_t dim() const { return points.cols(); }
  bool has_density() const { return static_cast<bool>(log_density); }
};

struct GaussianMode {
  double mean = 0.0;
  double stddev = 1.0;
  double weight = 1.0;
};

// Means -2.25 + 0.5k (k = 0..9), std 0.05, equal weights.
std::vector<GaussianMode> ten_mode_preset();
// Means -2.5 + k (k = 0..5), std 0.1, equal weights.
std::vector<GaussianMode> six_mode_preset();
// 0.5 N(-0.3, 0.1^2) + 0.5 N(0.3, 0.1^2)
std::vector<GaussianMode> two_mode_preset();

// Weights are normalized; every mode needs a positive weight and stddev.
double gaussian_mixture_log_density(std::span<const GaussianMode> modes, double x);
// d/dx log p(x)
double gaussian_mixture_score(std::span<const GaussianMode> modes, double x);
// Exact density of the mixture convolved with N(0, sigma^2).
std::vector<GaussianMode> convolve_with_gaussian(std::span<const GaussianMode> modes, double sigma);

// Annulus: radius ~ N(radius, stddev^2) around `center`, angle uniform.
struct RingComponent {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  double stddev = 0.01;
};

// Equal-weight mixture of rings; density N(|x - c|; R, s^2) / (2 pi |x - c|).
double ring_mixture_log_density(std::span<const RingComponent> rings, std::span<const double> x);

std::vector<RingComponent> ring_geometry();         // single unit ring, radial std 0.01
std::vector<RingComponent> rings_geometry();        // radii 0.25..1.0, radial std 0.02
std::vector<RingComponent> olympics_geometry();     // five unit rings, radial std 0.05

Dataset gen_two_mode_1d(std::size_t n, std::uint64_t seed);
Dataset gen_multimode_1d(std::vector<GaussianMode> modes, std::size_t n, std::uint64_t seed);
Dataset gen_ring(std::size_t n, std::uint64_t seed);
Dataset gen_rings(std::size_t n, std::uint64_t seed);
Dataset gen_olympics(std::size_t n, std::uint64_t seed);
// Uniform over the 32 unit squares (i, j) of [-4, 4)^2 with
// floor(x1 + 4) + floor(x2 + 4) even.
Dataset gen_checkerboard(std::size_t n, std::uint64_t seed);

struct DatasetSpec {
  std::string name;  // two_mode_1d | multimode_1d | ring | rings | olympics | checkerboard
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<GaussianMode> modes;  // multimode_1d only; empty selects the ten-mode preset
};

Dataset generate(const DatasetSpec& spec);
std::vector<std::string> dataset_names();

// Deterministic 90/10 train/held-out split.
struct Split {
  Tensor train;
  Tensor heldout;
};
Split split_holdout(const Tensor& points, std::uint64_t seed, double heldout_fraction = 0.1);

}  // namespace smoothar

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "smoothar/rng.hpp"
#include "smoothar/tensor.hpp"

namespace smoothar {

enum class KernelFamily { Gaussian, Laplace, Uniform };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// Isotropic, elementwise-independent smoothing distribution q(x̃ | x) with
// x̃ = x + ε. `scale` is the standard deviation (gaussian), the diversity b
// (laplace) or the half-width a (uniform). A zero scale is the point mass
// at x.
class SmoothingKernel {
 public:
  SmoothingKernel() = default;
  SmoothingKernel(KernelFamily family, double scale, std::size_t dim);

  KernelFamily family() const { return family_; }
  double scale() const { return scale_; }
  std::size_t dim() const { return dim_; }

  double sample_noise(Rng& rng) const;
  // x̃ for every row of x ([N, dim]).
  Tensor sample(const Tensor& x, Rng& rng) const;

  // One-dimensional log density of ε. -infinity outside the uniform support.
  double log_pdf_1d(double noise) const;
  // Sum over dimensions; depends on x̃ - x only and is symmetric in its
  // arguments. Returns -infinity when x̃ is outside the support.
  double log_pdf(std::span<const double> smoothed, std::span<const double> x) const;
  bool in_support(std::span<const double> smoothed, std::span<const double> x) const;

  // Differential entropy of q(· | x), summed over dimensions.
  double entropy() const;
  // Per-dimension E[(x̃_i - x_i)^2].
  double second_moment() const;

  friend bool operator==(const SmoothingKernel&, const SmoothingKernel&) = default;

 private:
  KernelFamily family_ = KernelFamily::Gaussian;
  double scale_ = 1.0;
  std::size_t dim_ = 1;
};

inline bool is_out_of_support(double log_density) { return log_density == -std::numeric_limits<double>::infinity(); }

// Median pairwise Euclidean distance divided by 2 sqrt(D). Datasets with more
// than 2000 points are subsampled to 2000 with `seed`. The median of an even
// number of distances is the lower middle element.
double sigma_heuristic(const Tensor& points, std::uint64_t seed);

}  // namespace smoothar

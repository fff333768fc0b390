#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "smoothar/datasets.hpp"
#include "smoothar/made.hpp"
#include "smoothar/rng.hpp"
#include "smoothar/smoothing.hpp"
#include "smoothar/tensor.hpp"

namespace smoothar {

using Density1d = std::function<double(double)>;

// Largest finite-difference slope of `density` over an evenly spaced grid.
double estimate_lipschitz_1d(const Density1d& density, double lo, double hi, std::size_t n_grid);

// q(x̃) = ∫ k(x̃ - x) p(x) dx by quadrature in the noise variable: `nodes`
// evenly spaced points covering the kernel (±8σ gaussian, ±20b laplace,
// ±a uniform), weights proportional to k and summing to one. Node 0 sits at
// ε = 0, so every kink of k lies on a node.
class SmoothedDensity1d {
 public:
  SmoothedDensity1d(Density1d density, const SmoothingKernel& kernel, std::size_t nodes = 2001);
  double operator()(double x) const;

 private:
  Density1d density_;
  std::vector<double> offsets_;
  std::vector<double> weights_;
};

struct LipschitzGrid {
  double lo = -6.0;
  double hi = 6.0;
  std::size_t points = 12001;
};

struct Theorem1Result {
  double sigma = 0.0;
  double lip_original = 0.0;
  double lip_smoothed = 0.0;
  bool holds = false;  // lip_smoothed <= lip_original * (1 + 1e-6)
};

// `spec` must name a 1-d dataset with an exact density; spec.n is ignored.
Theorem1Result check_theorem1(const DatasetSpec& spec, KernelFamily family, double sigma, const LipschitzGrid& grid = {});
std::vector<Theorem1Result> theorem1_sweep(const DatasetSpec& spec, KernelFamily family, std::span<const double> sigmas,
                                           const LipschitzGrid& grid = {});

// A log density with its Laplacian, both in closed form.
struct AnalyticLogDensity {
  std::function<double(std::span<const double>)> log_p;
  std::function<double(std::span<const double>)> laplacian;
};

AnalyticLogDensity standard_normal_log_density();  // any dimension
AnalyticLogDensity quartic_log_density();          // -sum x_i^4, unnormalized

struct Prop1Result {
  double lhs = 0.0;         // Monte-Carlo E_q[log p(x̃)]
  double rhs = 0.0;         // log p(x) + (eta / 2) * laplacian
  double gap = 0.0;         // |lhs - rhs|
  double std_error = 0.0;   // of lhs
};

Prop1Result check_proposition1(const AnalyticLogDensity& density, const SmoothingKernel& kernel, std::span<const double> x,
                               std::size_t mc_samples, Rng& rng);

struct RingGradient {
  double offset = 0.0;
  double grad_x = 0.0;
  double grad_y = 0.0;
};

// Central-difference (h = 1e-6) gradient of the ring-mixture density at
// (sqrt(0.5) + c, sqrt(0.5) + c) for each offset c.
std::vector<RingGradient> ring_trajectory_derivatives(std::span<const RingComponent> rings, std::span<const double> offsets);

struct AblationRow {
  double sigma = 0.0;
  Tensor samples;      // after x + sigma^2 grad log p(x)
  double valley_before = 0.0;
  double valley_after = 0.0;  // both NaN unless the model is 1-d
};

// One shared draw of n baseline samples, then the single-step update per sigma.
std::vector<AblationRow> ablation_unsmoothed_denoise(const MadeModel& baseline, std::span<const double> sigmas, std::size_t n,
                                                     Rng& rng, double valley_half_width = 0.15);

}  // namespace smoothar

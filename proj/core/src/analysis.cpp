#include "smoothar/analysis.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "smoothar/error.hpp"
#include "smoothar/inference.hpp"

namespace smoothar {

double estimate_lipschitz_1d(const Density1d& density, double lo, double hi, std::size_t n_grid) {
  if (n_grid < 2) throw ContractError("Lipschitz grid needs at least two points");
  if (!(hi > lo)) throw ContractError("Lipschitz grid needs hi > lo");
  const double dx = (hi - lo) / static_cast<double>(n_grid - 1);
  double prev = density(lo);
  double best = 0.0;
  for (std::size_t i = 1; i < n_grid; ++i) {
    const double x = i + 1 == n_grid ? hi : lo + dx * static_cast<double>(i);
    const double cur = density(x);
    if (!std::isfinite(cur) || !std::isfinite(prev)) throw DomainError("density is not finite on the Lipschitz grid");
    best = std::max(best, std::abs(cur - prev) / dx);
    prev = cur;
  }
  return best;
}

SmoothedDensity1d::SmoothedDensity1d(Density1d density, const SmoothingKernel& kernel, std::size_t nodes)
    : density_(std::move(density)) {
  if (kernel.dim() != 1) throw DimensionError("numeric convolution needs a 1-d kernel");
  if (nodes < 3 || nodes % 2 == 0) throw ContractError("quadrature needs an odd node count of at least 3");
  const double s = kernel.scale();
  if (s == 0.0) {
    offsets_ = {0.0};
    weights_ = {1.0};
    return;
  }
  double half = 0.0;
  switch (kernel.family()) {
    case KernelFamily::Gaussian: half = 8.0 * s; break;
    case KernelFamily::Laplace: half = 20.0 * s; break;
    case KernelFamily::Uniform: half = s; break;
  }
  const std::size_t m = nodes / 2;
  const double step = half / static_cast<double>(m);
  double total = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    const double eps = (static_cast<double>(j) - static_cast<double>(m)) * step;
    // trapezoid end weights on the uniform box
    double w = std::exp(kernel.log_pdf_1d(eps));
    if (kernel.family() == KernelFamily::Uniform && (j == 0 || j + 1 == nodes)) w *= 0.5;
    offsets_.push_back(eps);
    weights_.push_back(w);
    total += w;
  }
  for (double& w : weights_) w /= total;
}

double SmoothedDensity1d::operator()(double x) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < offsets_.size(); ++j) acc += weights_[j] * density_(x - offsets_[j]);
  return acc;
}

namespace {

Density1d exact_density_1d(const DatasetSpec& spec) {
  DatasetSpec copy = spec;
  copy.n = 0;
  Dataset ds = generate(copy);
  if (!ds.has_density()) throw ContractError("dataset '" + spec.name + "' has no exact density");
  // The density's dimension is only known from its evaluation.
  const double probe = 0.0;
  try {
    ds.log_density(std::span<const double>(&probe, 1));
  } catch (const DimensionError&) {
    throw ContractError("Theorem 1 checks need a 1-d dataset, got '" + spec.name + "'");
  }
  return [log_density = std::move(ds.log_density)](double x) { return std::exp(log_density(std::span<const double>(&x, 1))); };
}

}  // namespace

Theorem1Result check_theorem1(const DatasetSpec& spec, KernelFamily family, double sigma, const LipschitzGrid& grid) {
  const Density1d p = exact_density_1d(spec);
  const SmoothedDensity1d q(p, SmoothingKernel(family, sigma, 1));
  Theorem1Result r;
  r.sigma = sigma;
  r.lip_original = estimate_lipschitz_1d(p, grid.lo, grid.hi, grid.points);
  r.lip_smoothed = estimate_lipschitz_1d(q, grid.lo, grid.hi, grid.points);
  r.holds = r.lip_smoothed <= r.lip_original * (1.0 + 1e-6);
  return r;
}

std::vector<Theorem1Result> theorem1_sweep(const DatasetSpec& spec, KernelFamily family, std::span<const double> sigmas,
                                           const LipschitzGrid& grid) {
  const Density1d p = exact_density_1d(spec);
  const double lip_original = estimate_lipschitz_1d(p, grid.lo, grid.hi, grid.points);
  std::vector<Theorem1Result> rows;
  for (const double sigma : sigmas) {
    const SmoothedDensity1d q(p, SmoothingKernel(family, sigma, 1));
    Theorem1Result r;
    r.sigma = sigma;
    r.lip_original = lip_original;
    r.lip_smoothed = estimate_lipschitz_1d(q, grid.lo, grid.hi, grid.points);
    r.holds = r.lip_smoothed <= r.lip_original * (1.0 + 1e-6);
    rows.push_back(r);
  }
  return rows;
}

AnalyticLogDensity standard_normal_log_density() {
  return {[](std::span<const double> x) {
            double acc = 0.0;
            for (const double v : x) acc += -0.5 * v * v - 0.5 * std::log(2.0 * std::numbers::pi);
            return acc;
          },
          [](std::span<const double> x) { return -static_cast<double>(x.size()); }};
}

AnalyticLogDensity quartic_log_density() {
  return {[](std::span<const double> x) {
            double acc = 0.0;
            for (const double v : x) acc -= v * v * v * v;
            return acc;
          },
          [](std::span<const double> x) {
            double acc = 0.0;
            for (const double v : x) acc -= 12.0 * v * v;
            return acc;
          }};
}

Prop1Result check_proposition1(const AnalyticLogDensity& density, const SmoothingKernel& kernel, std::span<const double> x,
                               std::size_t mc_samples, Rng& rng) {
  if (mc_samples == 0) throw ContractError("Proposition 1 check needs at least one Monte-Carlo sample");
  if (x.size() != kernel.dim()) throw DimensionError("point and kernel dimensions differ");
  const double eta = kernel.second_moment();
  if (!std::isfinite(eta)) throw ContractError("kernel second moment must be finite");
  std::vector<double> shifted(x.size());
  // Welford running mean and variance
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t m = 0; m < mc_samples; ++m) {
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + kernel.sample_noise(rng);
    const double v = density.log_p(shifted);
    const double delta = v - mean;
    mean += delta / static_cast<double>(m + 1);
    m2 += delta * (v - mean);
  }
  Prop1Result r;
  r.lhs = mean;
  r.rhs = density.log_p(x) + 0.5 * eta * density.laplacian(x);
  r.gap = std::abs(r.lhs - r.rhs);
  r.std_error = mc_samples > 1 ? std::sqrt(m2 / static_cast<double>(mc_samples - 1) / static_cast<double>(mc_samples)) : 0.0;
  return r;
}

std::vector<RingGradient> ring_trajectory_derivatives(std::span<const RingComponent> rings, std::span<const double> offsets) {
  constexpr double h = 1e-6;
  const auto p = [&rings](double a, double b) {
    const double pt[2] = {a, b};
    return std::exp(ring_mixture_log_density(rings, pt));
  };
  std::vector<RingGradient> out;
  for (const double c : offsets) {
    const double v = std::sqrt(0.5) + c;
    out.push_back({c, (p(v + h, v) - p(v - h, v)) / (2.0 * h), (p(v, v + h) - p(v, v - h)) / (2.0 * h)});
  }
  return out;
}

std::vector<AblationRow> ablation_unsmoothed_denoise(const MadeModel& baseline, std::span<const double> sigmas, std::size_t n,
                                                     Rng& rng, double valley_half_width) {
  if (baseline.cond_dim() != 0) throw ContractError("ablation needs an unconditional baseline");
  const Tensor base = baseline.sample(Tensor(), n, rng);
  const bool one_d = baseline.input_dim() == 1 && n > 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double before = one_d ? valley_mass(base, valley_half_width) : nan;
  const Tensor grad = n > 0 ? baseline.grad_log_prob_wrt_input(Tensor(), base) : base;
  std::vector<AblationRow> rows;
  for (const double sigma : sigmas) {
    if (!(sigma >= 0.0)) throw ContractError("ablation sigmas must be non-negative");
    AblationRow row;
    row.sigma = sigma;
    row.samples = single_step_denoise([&grad](const Tensor&) { return grad; }, base, sigma);
    row.valley_before = before;
    row.valley_after = one_d ? valley_mass(row.samples, valley_half_width) : nan;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace smoothar

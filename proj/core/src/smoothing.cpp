#include "smoothar/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "smoothar/error.hpp"

namespace smoothar {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Laplace: return "laplace";
    case KernelFamily::Uniform: return "uniform";
  }
  return "gaussian";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "laplace") return KernelFamily::Laplace;
  if (name == "uniform") return KernelFamily::Uniform;
  throw ConfigError("unknown kernel family '" + name + "' (expected gaussian|laplace|uniform)");
}

SmoothingKernel::SmoothingKernel(KernelFamily family, double scale, std::size_t dim)
    : family_(family), scale_(scale), dim_(dim) {
  if (!std::isfinite(scale) || scale < 0.0) throw ConfigError("kernel scale must be finite and non-negative");
  if (dim == 0) throw ConfigError("kernel dimension must be positive");
}

double SmoothingKernel::sample_noise(Rng& rng) const {
  switch (family_) {
    case KernelFamily::Gaussian: return scale_ * rng.normal();
    case KernelFamily::Laplace: return scale_ * rng.laplace();
    case KernelFamily::Uniform: return rng.uniform(-scale_, scale_);
  }
  return 0.0;
}

Tensor SmoothingKernel::sample(const Tensor& x, Rng& rng) const {
  if (x.rank() != 2 || x.cols() != dim_) {
    throw DimensionError("kernel of dimension " + std::to_string(dim_) + " applied to " + shape_string(x.shape()));
  }
  Tensor out = x;
  for (double& v : out.data()) v += sample_noise(rng);
  return out;
}

double SmoothingKernel::log_pdf_1d(double noise) const {
  if (scale_ == 0.0) return noise == 0.0 ? kInf : -kInf;
  switch (family_) {
    case KernelFamily::Gaussian: {
      const double z = noise / scale_;
      return -0.5 * z * z - std::log(scale_) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    case KernelFamily::Laplace:
      return -std::abs(noise) / scale_ - std::log(2.0 * scale_);
    case KernelFamily::Uniform:
      return std::abs(noise) <= scale_ ? -std::log(2.0 * scale_) : -kInf;
  }
  return -kInf;
}

double SmoothingKernel::log_pdf(std::span<const double> smoothed, std::span<const double> x) const {
  if (smoothed.size() != dim_ || x.size() != dim_) {
    throw DimensionError("kernel log density of dimension " + std::to_string(dim_) + " given " +
                         std::to_string(smoothed.size()) + " and " + std::to_string(x.size()) + " values");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    // |a - b| is symmetric exactly in floating point
    const double diff = std::abs(smoothed[i] - x[i]);
    const double lp = log_pdf_1d(diff);
    if (is_out_of_support(lp)) return -kInf;
    total += lp;
  }
  return total;
}

bool SmoothingKernel::in_support(std::span<const double> smoothed, std::span<const double> x) const {
  return !is_out_of_support(log_pdf(smoothed, x));
}

double SmoothingKernel::entropy() const {
  if (scale_ == 0.0) return -kInf;
  double per_dim = 0.0;
  switch (family_) {
    case KernelFamily::Gaussian:
      per_dim = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * scale_ * scale_);
      break;
    case KernelFamily::Laplace:
      per_dim = 1.0 + std::log(2.0 * scale_);
      break;
    case KernelFamily::Uniform:
      per_dim = std::log(2.0 * scale_);
      break;
  }
  return static_cast<double>(dim_) * per_dim;
}

double SmoothingKernel::second_moment() const {
  switch (family_) {
    case KernelFamily::Gaussian: return scale_ * scale_;
    case KernelFamily::Laplace: return 2.0 * scale_ * scale_;
    case KernelFamily::Uniform: return scale_ * scale_ / 3.0;
  }
  return 0.0;
}

double sigma_heuristic(const Tensor& points, std::uint64_t seed) {
  if (points.rank() != 2 || points.rows() < 2) {
    throw ContractError("sigma heuristic needs at least two points, got shape " + shape_string(points.shape()));
  }
  constexpr std::size_t kMaxPoints = 2000;
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n > kMaxPoints) {
    Rng rng(seed);
    for (std::size_t i = 0; i < kMaxPoints; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
    idx.resize(kMaxPoints);
  }
  std::vector<double> dist;
  dist.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = points.at(idx[a], k) - points.at(idx[b], k);
        s += diff * diff;
      }
      dist.push_back(std::sqrt(s));
    }
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid / (2.0 * std::sqrt(static_cast<double>(d)));
}

}  // namespace smoothar

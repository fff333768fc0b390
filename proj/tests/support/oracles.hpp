#pragma once

// Reference computations written independently of the library code paths
// they check. Plain loops over doubles only.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "smoothar/rng.hpp"
#include "smoothar/tensor.hpp"

namespace oracle {

inline double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

// e^{-z} / (s (1 + e^{-z})^2), evaluated on the side that cannot overflow.
inline double logistic_pdf(double x, double mean, double s) {
  const double z = std::abs((x - mean) / s);
  const double e = std::exp(-z);
  return e / (s * (1.0 + e) * (1.0 + e));
}

inline double logistic_cdf(double x, double mean, double s) { return 1.0 / (1.0 + std::exp(-(x - mean) / s)); }

inline double mixture_of_logistics_pdf(const std::vector<double>& logits, const std::vector<double>& means,
                                       const std::vector<double>& scales, double x) {
  double zmax = *std::max_element(logits.begin(), logits.end());
  double norm = 0.0;
  for (double l : logits) norm += std::exp(l - zmax);
  double p = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) p += std::exp(logits[k] - zmax) / norm * logistic_pdf(x, means[k], scales[k]);
  return p;
}

// Composite trapezoid rule with n intervals.
inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  double acc = 0.5 * (f(lo) + f(hi));
  for (std::size_t i = 1; i < n; ++i) acc += f(lo + h * static_cast<double>(i));
  return acc * h;
}

// Central differences of a scalar function of a flat parameter vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(1, |a|, |b|): relative for large values, absolute near zero.
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
  return m;
}

inline smoothar::Tensor random_tensor(smoothar::Shape shape, smoothar::Rng& rng, double lo = -1.0, double hi = 1.0) {
  smoothar::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Scalar Adam with bias correction.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double w, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return w - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace oracle

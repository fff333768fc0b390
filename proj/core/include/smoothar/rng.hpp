#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace smoothar {

// Seeded random source shared by every sampler in the library. All draws go
// through this wrapper so a run is reproducible from its 64-bit seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = std::generate_canonical<double, 53>(engine_);
      if (u > 0.0) return u;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Standard Laplace (scale 1) by inverse CDF.
  double laplace();

  // Standard logistic by inverse CDF.
  double logistic();

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  // Derive an independent child seed, e.g. one per training step or per
  // grid-search configuration.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline double Rng::laplace() {
  const double u = uniform() - 0.5;
  const double a = 1.0 - 2.0 * (u < 0 ? -u : u);
  // a in (0, 1]
  return (u < 0 ? 1.0 : -1.0) * std::log(a);
}

inline double Rng::logistic() {
  const double u = uniform();
  return std::log(u) - std::log1p(-u);
}

inline std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace smoothar

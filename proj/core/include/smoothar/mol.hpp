#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "smoothar/rng.hpp"
#include "smoothar/tape.hpp"

namespace smoothar {

// Smallest logistic scale a mixture component may take; log-scales are
// clamped to log(kMinScale) before use.
inline constexpr double kMinScale = 1e-4;
inline const double kMinLogScale = std::log(kMinScale);

// K-component continuous mixture of logistics on the real line.
struct MoLParams {
  std::vector<double> logits;
  std::vector<double> means;
  std::vector<double> log_scales;

  std::size_t components() const { return logits.size(); }
  // Throws ContractError if the three arrays disagree in length or are empty.
  void validate() const;
  std::vector<double> weights() const;
};

double mol_log_pdf(const MoLParams& params, double x);
double mol_sample(const MoLParams& params, Rng& rng);

// Raw network layout for one dimension: [logits(K), means(K), log_scales(K)].
// `raw` must hold 3K values.
double mol_log_pdf_raw(std::span<const double> raw, double x);
double mol_sample_raw(std::span<const double> raw, Rng& rng);
MoLParams mol_params_from_raw(std::span<const double> raw);

// Accumulates d log p / d raw (3K values) into `grad_raw` and returns
// d log p / dx; `scale` multiplies every contribution.
double mol_log_pdf_raw_grad(std::span<const double> raw, double x, double scale, std::span<double> grad_raw);

namespace diff {

// Recorded mixture-of-logistics log-likelihood. `params` is [N, D*3K] laid out
// per dimension as [logits, means, log_scales]; `x` is [N, D]. Returns [N]
// holding sum over dimensions of the per-dimension log densities.
Var mol_log_prob(const Var& params, const Var& x, std::size_t components);

}  // namespace diff

}  // namespace smoothar

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smoothar/datasets.hpp"
#include "smoothar/made.hpp"
#include "smoothar/rng.hpp"
#include "smoothar/tensor.hpp"
#include "smoothar/training.hpp"

namespace smoothar {

struct TwoStageSamples {
  Tensor smoothed;  // x̃ ~ p(x̃)
  Tensor denoised;  // x ~ p(x | x̃)
};

TwoStageSamples sample_two_stage(const TwoStageModel& model, std::size_t n, Rng& rng);

// Gradient of a log density, evaluated row-wise on an [N, D] tensor.
using ScoreFn = std::function<Tensor(const Tensor&)>;

// x̄ = x̃ + sigma^2 grad log p(x̃), one step.
Tensor single_step_denoise(const ScoreFn& score, const Tensor& smoothed, double sigma);
// Same update with the model's input gradient. The kernel must be gaussian.
Tensor single_step_denoise(const MadeModel& prior, const Tensor& smoothed, const SmoothingKernel& kernel);

// One draw from p(x | x̃) per row of `smoothed`.
Tensor model_denoise(const TwoStageModel& model, const Tensor& smoothed, Rng& rng);

// Monte-Carlo evidence lower bound per row of x:
//   (1/M) sum_m [log p(x̃_m) + log p(x | x̃_m)] + H[q],  x̃_m ~ q(. | x).
std::vector<double> elbo(const TwoStageModel& model, const Tensor& x, std::size_t mc_samples, Rng& rng);
double elbo(const TwoStageModel& model, std::span<const double> x, std::size_t mc_samples, Rng& rng);

// log p(x | x̃) as a plain function: (x, x̃) -> value.
using ConditionalLogDensityFn = std::function<double(std::span<const double>, std::span<const double>)>;
// The same bound for arbitrary prior and denoiser densities.
double elbo(const LogDensityFn& log_prior, const ConditionalLogDensityFn& log_denoiser, const SmoothingKernel& kernel,
            std::span<const double> x, std::size_t mc_samples, Rng& rng);

enum class EvalMode { Exact, Elbo };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& name);

struct NllResult {
  double nll = 0.0;  // nats per sample; an upper bound in ELBO mode
  EvalMode mode = EvalMode::Exact;
  std::size_t mc_samples = 0;
  std::size_t points = 0;
};

NllResult eval_nll(const MadeModel& model, const Tensor& test);
// Two-stage models only support EvalMode::Elbo.
NllResult eval_nll(const TwoStageModel& model, const Tensor& test, EvalMode mode, std::size_t mc_samples, Rng& rng);

// Fraction of 1-d samples with |x| < half_width.
double valley_mass(const Tensor& samples, double half_width);

}  // namespace smoothar

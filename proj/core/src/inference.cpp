#include "smoothar/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smoothar/error.hpp"

namespace smoothar {

namespace {

// Rows of x repeated per Monte-Carlo draw; bounded so the forward pass stays small.
constexpr std::size_t kElboChunkRows = 8192;

}  // namespace

TwoStageSamples sample_two_stage(const TwoStageModel& model, std::size_t n, Rng& rng) {
  model.validate();
  TwoStageSamples out;
  out.smoothed = model.prior.sample(Tensor(), n, rng);
  out.denoised = model.denoiser.sample(out.smoothed, n, rng);
  return out;
}

Tensor single_step_denoise(const ScoreFn& score, const Tensor& smoothed, double sigma) {
  if (!(sigma >= 0.0)) throw ContractError("denoising sigma must be non-negative");
  const Tensor grad = score(smoothed);
  if (grad.shape() != smoothed.shape()) {
    throw DimensionError("score returned " + shape_string(grad.shape()) + " for input " + shape_string(smoothed.shape()));
  }
  Tensor out = smoothed;
  const double s2 = sigma * sigma;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += s2 * grad[i];
  return out;
}

Tensor single_step_denoise(const MadeModel& prior, const Tensor& smoothed, const SmoothingKernel& kernel) {
  if (kernel.family() != KernelFamily::Gaussian) {
    throw ContractError("single-step denoising needs a gaussian kernel, got " + to_string(kernel.family()));
  }
  if (prior.cond_dim() != 0) throw ContractError("single-step denoising needs an unconditional prior");
  return single_step_denoise([&prior](const Tensor& x) { return prior.grad_log_prob_wrt_input(Tensor(), x); }, smoothed,
                             kernel.scale());
}

Tensor model_denoise(const TwoStageModel& model, const Tensor& smoothed, Rng& rng) {
  model.validate();
  if (smoothed.rank() != 2 || smoothed.cols() != model.dim()) {
    throw DimensionError("x̃ " + shape_string(smoothed.shape()) + " does not match model dimension");
  }
  return model.denoiser.sample(smoothed, smoothed.rows(), rng);
}

std::vector<double> elbo(const TwoStageModel& model, const Tensor& x, std::size_t mc_samples, Rng& rng) {
  model.validate();
  if (mc_samples == 0) throw ContractError("ELBO needs at least one Monte-Carlo sample");
  if (x.rank() != 2 || x.cols() != model.dim()) {
    throw DimensionError("ELBO input " + shape_string(x.shape()) + " does not match model dimension");
  }
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const double entropy = model.kernel.entropy();
  std::vector<double> out(n, 0.0);
  const std::size_t points_per_chunk = std::max<std::size_t>(1, kElboChunkRows / mc_samples);
  for (std::size_t start = 0; start < n; start += points_per_chunk) {
    const std::size_t count = std::min(points_per_chunk, n - start);
    Tensor repeated(Shape{count * mc_samples, d});
    for (std::size_t p = 0; p < count; ++p)
      for (std::size_t m = 0; m < mc_samples; ++m)
        std::copy_n(x.row(start + p).begin(), d, repeated.row(p * mc_samples + m).begin());
    const Tensor smoothed = model.kernel.sample(repeated, rng);
    const std::vector<double> lp_prior = model.prior.log_prob(Tensor(), smoothed);
    const std::vector<double> lp_denoiser = model.denoiser.log_prob(smoothed, repeated);
    for (std::size_t p = 0; p < count; ++p) {
      double acc = 0.0;
      for (std::size_t m = 0; m < mc_samples; ++m) acc += lp_prior[p * mc_samples + m] + lp_denoiser[p * mc_samples + m];
      out[start + p] = acc / static_cast<double>(mc_samples) + entropy;
    }
  }
  return out;
}

double elbo(const TwoStageModel& model, std::span<const double> x, std::size_t mc_samples, Rng& rng) {
  const Tensor row(Shape{1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return elbo(model, row, mc_samples, rng).front();
}

double elbo(const LogDensityFn& log_prior, const ConditionalLogDensityFn& log_denoiser, const SmoothingKernel& kernel,
            std::span<const double> x, std::size_t mc_samples, Rng& rng) {
  if (mc_samples == 0) throw ContractError("ELBO needs at least one Monte-Carlo sample");
  if (x.size() != kernel.dim()) throw DimensionError("ELBO point and kernel dimensions differ");
  std::vector<double> smoothed(x.size());
  double acc = 0.0;
  for (std::size_t m = 0; m < mc_samples; ++m) {
    for (std::size_t i = 0; i < x.size(); ++i) smoothed[i] = x[i] + kernel.sample_noise(rng);
    acc += log_prior(smoothed) + log_denoiser(x, smoothed);
  }
  return acc / static_cast<double>(mc_samples) + kernel.entropy();
}

std::string to_string(EvalMode mode) { return mode == EvalMode::Exact ? "exact" : "elbo"; }

EvalMode eval_mode_from_string(const std::string& name) {
  if (name == "exact") return EvalMode::Exact;
  if (name == "elbo") return EvalMode::Elbo;
  throw ConfigError("unknown evaluation mode '" + name + "'");
}

NllResult eval_nll(const MadeModel& model, const Tensor& test) {
  if (model.cond_dim() != 0) throw ContractError("exact NLL needs an unconditional model");
  if (test.rank() != 2 || test.cols() != model.input_dim() || test.rows() == 0) {
    throw DimensionError("test data " + shape_string(test.shape()) + " does not match model dimension");
  }
  const std::vector<double> lp = model.log_prob(Tensor(), test);
  NllResult r;
  r.mode = EvalMode::Exact;
  r.points = test.rows();
  r.nll = -std::accumulate(lp.begin(), lp.end(), 0.0) / static_cast<double>(lp.size());
  return r;
}

NllResult eval_nll(const TwoStageModel& model, const Tensor& test, EvalMode mode, std::size_t mc_samples, Rng& rng) {
  if (mode == EvalMode::Exact) throw ContractError("two-stage models have no exact likelihood; use ELBO evaluation");
  if (test.rows() == 0) throw ContractError("test data is empty");
  const std::vector<double> values = elbo(model, test, mc_samples, rng);
  NllResult r;
  r.mode = EvalMode::Elbo;
  r.mc_samples = mc_samples;
  r.points = test.rows();
  r.nll = -std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return r;
}

double valley_mass(const Tensor& samples, double half_width) {
  if (samples.numel() == 0) throw ContractError("valley mass of an empty sample");
  if (samples.rank() == 2 && samples.cols() != 1) throw DimensionError("valley mass expects 1-d samples");
  std::size_t inside = 0;
  for (const double v : samples.values())
    if (std::abs(v) < half_width) ++inside;
  return static_cast<double>(inside) / static_cast<double>(samples.numel());
}

}  // namespace smoothar

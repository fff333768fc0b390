#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smoothar/made.hpp"
#include "smoothar/smoothing.hpp"
#include "smoothar/tensor.hpp"

namespace smoothar {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::size_t step = 0;
};

// Adam with bias correction. State is lazily sized on the first call.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 128;
  std::size_t steps = 20000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t elbo_mc_samples = 1;
  std::size_t trace_every = 100;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

// Network shape shared by the baseline and both two-stage networks.
struct ModelArch {
  std::vector<std::size_t> hidden_sizes;
  std::size_t components = 2;
  Activation activation = Activation::Tanh;
};

ModelArch default_arch_1d(std::size_t components);        // [100, 100], tanh
ModelArch default_arch_2d(std::size_t components);        // [256, 256, 256], relu
ModelArch default_baseline_arch_2d(std::size_t components);  // [512, 512, 512], relu

// Mean minibatch loss over each `trace_every`-step window, keyed by the
// step count at the end of the window.
struct LossPoint {
  std::size_t step = 0;
  double loss = 0.0;
};
using LossTrace = std::vector<LossPoint>;

MadeModel make_baseline(std::size_t dim, const ModelArch& arch, Rng& rng);

// Minibatch maximum likelihood on `data` ([N, D]); batches are drawn with
// replacement from a per-step seed derived from config.seed.
LossTrace train_baseline(MadeModel& model, const Tensor& data, const TrainConfig& config);

// Prior over x̃, denoiser over x given x̃, and the kernel coupling them.
struct TwoStageModel {
  MadeModel prior;
  MadeModel denoiser;
  SmoothingKernel kernel;

  std::size_t dim() const { return kernel.dim(); }
  void validate() const;
};

TwoStageModel make_two_stage(std::size_t dim, const ModelArch& arch, const SmoothingKernel& kernel, Rng& rng);

struct TwoStageTraces {
  LossTrace prior;
  LossTrace denoiser;
};

// Per minibatch: draw x̃ ~ q(. | x), one Adam step on -mean log p(x̃) and one
// on -mean log p(x | x̃). The networks share no parameters.
TwoStageTraces train_two_stage(TwoStageModel& model, const Tensor& data, const TrainConfig& config);

// Both minibatch losses for a fixed (x, x̃) pair, and the matching Monte-Carlo
// estimate of the smoothed objective J = E[log p(x̃)] + E[log p(x | x̃)].
struct TwoStageBatchLoss {
  double prior_loss = 0.0;
  double denoiser_loss = 0.0;
  double objective = 0.0;
};
TwoStageBatchLoss two_stage_batch_objective(const TwoStageModel& model, const Tensor& x, const Tensor& smoothed);

struct GridSearchRow {
  double sigma = 0.0;
  double heldout_elbo = 0.0;
};

struct GridSearchResult {
  KernelFamily family = KernelFamily::Gaussian;
  std::vector<GridSearchRow> rows;
  double best_sigma = 0.0;
  double best_elbo = 0.0;
};

// Trains one two-stage model per sigma (identical seeds) and scores each by
// its mean held-out ELBO with `eval_mc` Monte-Carlo draws per point.
GridSearchResult grid_search_sigma(KernelFamily family, std::span<const double> sigmas, const Tensor& train,
                                   const Tensor& heldout, const ModelArch& arch, const TrainConfig& config,
                                   std::size_t eval_mc);

}  // namespace smoothar

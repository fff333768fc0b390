#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "smoothar/datasets.hpp"
#include "smoothar/error.hpp"
#include "smoothar/inference.hpp"
#include "smoothar/training.hpp"

using namespace smoothar;

namespace {

double true_nll(const Dataset& ds, const Tensor& points) {
  double acc = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) acc -= ds.log_density(points.row(i));
  return acc / static_cast<double>(points.rows());
}

TrainConfig quick(std::size_t steps, std::uint64_t seed = 1) {
  TrainConfig c;
  c.steps = steps;
  c.seed = seed;
  return c;
}

ModelArch small_arch(std::size_t k) { return {{32, 32}, k, Activation::Tanh}; }

}  // namespace

TEST_CASE("adam: zero gradient is a fixed point") {
  Tensor w = Tensor::vector({1.0, -2.0});
  AdamState state;
  Tensor* params[] = {&w};
  const Tensor zero({2});
  for (int i = 0; i < 10; ++i) adam_step(params, std::span<const Tensor>(&zero, 1), state, {});
  CHECK(w == Tensor::vector({1.0, -2.0}));
}

TEST_CASE("adam: constant gradient steps approach the learning rate") {
  Tensor w = Tensor::vector({0.0, 0.0});
  AdamState state;
  Tensor* params[] = {&w};
  const Tensor g = Tensor::vector({3.0, -0.5});
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  Tensor before = w;
  for (int i = 0; i < 2000; ++i) {
    before = w;
    adam_step(params, std::span<const Tensor>(&g, 1), state, cfg);
  }
  CHECK(std::abs(before[0] - w[0]) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(w[1] - before[1] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam: matches the scalar oracle on a quadratic bowl") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  oracle::ScalarAdam ref{0.1, 0.9, 0.999, 1e-8};
  Tensor w = Tensor::vector({1.0});
  double wr = 1.0;
  AdamState state;
  Tensor* params[] = {&w};
  for (int i = 0; i < 500; ++i) {
    const Tensor g = Tensor::vector({2.0 * w[0]});
    adam_step(params, std::span<const Tensor>(&g, 1), state, cfg);
    wr = ref.step(wr, 2.0 * wr);
    REQUIRE(oracle::rel_err(w[0], wr) < 1e-13);
  }
  CHECK(std::abs(w[0]) < 1e-3);
}

TEST_CASE("adam: mismatched shapes") {
  Tensor w = Tensor::vector({1.0});
  AdamState state;
  Tensor* params[] = {&w};
  const Tensor g = Tensor::vector({1.0, 2.0});
  CHECK_THROWS_AS(adam_step(params, std::span<const Tensor>(&g, 1), state, {}), DimensionError);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("baseline: zero steps leave the model unchanged") {
  Rng rng(1);
  MadeModel m = make_baseline(1, small_arch(2), rng);
  const auto before = m.layers();
  const Dataset ds = gen_two_mode_1d(100, 1);
  CHECK(train_baseline(m, ds.points, quick(0)).empty());
  for (std::size_t l = 0; l < before.size(); ++l) CHECK(m.layers()[l].weight == before[l].weight);
}

TEST_CASE("baseline: standard normal reaches its entropy") {
  const Dataset ds = gen_multimode_1d({{0.0, 1.0, 1.0}}, 20000, 2);
  const Split split = split_holdout(ds.points, 2);
  Rng rng(3);
  MadeModel m = make_baseline(1, default_arch_1d(1), rng);
  TrainConfig c = quick(4000, 3);
  c.learning_rate = 2e-3;
  train_baseline(m, split.train, c);
  const double entropy = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  CHECK(eval_nll(m, split.heldout).nll == doctest::Approx(entropy).epsilon(0.05 / entropy));
}

TEST_CASE("baseline: two-mode data approaches the true NLL") {
  const Dataset ds = gen_two_mode_1d(20000, 4);
  const Split split = split_holdout(ds.points, 4);
  Rng rng(5);
  MadeModel m = make_baseline(1, default_arch_1d(2), rng);
  TrainConfig c = quick(6000, 5);
  c.learning_rate = 2e-3;
  const LossTrace trace = train_baseline(m, split.train, c);
  CHECK(trace.size() == 60);
  CHECK(trace.back().step == 6000);
  CHECK(std::abs(eval_nll(m, split.heldout).nll - true_nll(ds, split.heldout)) < 0.1);
}

TEST_CASE("baseline: traces are deterministic; partial windows are flushed") {
  const Dataset ds = gen_ring(500, 6);
  TrainConfig c = quick(250, 7);
  Rng r1(8), r2(8);
  MadeModel a = make_baseline(2, small_arch(2), r1);
  MadeModel b = make_baseline(2, small_arch(2), r2);
  const LossTrace ta = train_baseline(a, ds.points, c);
  const LossTrace tb = train_baseline(b, ds.points, c);
  REQUIRE(ta.size() == 3);
  CHECK(ta[2].step == 250);
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i].loss == tb[i].loss);
  CHECK(a.layers().back().weight == b.layers().back().weight);
}

TEST_CASE("baseline: non-finite loss aborts with step and batch seed") {
  Rng rng(9);
  MadeModel m = make_baseline(1, small_arch(1), rng);
  (*m.parameters().back())[1] = std::nan("");
  const Dataset ds = gen_two_mode_1d(50, 1);
  try {
    train_baseline(m, ds.points, quick(5, 11));
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("step 0") != std::string::npos);
    CHECK(msg.find(std::to_string(Rng::derive(11, 0))) != std::string::npos);
  }
}

TEST_CASE("baseline: data dimension must match") {
  Rng rng(10);
  MadeModel m = make_baseline(2, small_arch(1), rng);
  CHECK_THROWS_AS(train_baseline(m, gen_two_mode_1d(10, 1).points, quick(1)), DimensionError);
}

TEST_CASE("two-stage: model validation") {
  Rng rng(11);
  TwoStageModel ts = make_two_stage(1, small_arch(1), SmoothingKernel(KernelFamily::Gaussian, 0.3, 1), rng);
  CHECK_NOTHROW(ts.validate());
  ts.kernel = SmoothingKernel(KernelFamily::Gaussian, 0.3, 2);
  CHECK_THROWS_AS(ts.validate(), ContractError);
  CHECK_THROWS_AS(make_two_stage(2, small_arch(1), SmoothingKernel(KernelFamily::Gaussian, 0.3, 1), rng), DimensionError);
}

TEST_CASE("two-stage: summed losses equal the negated objective on a shared batch") {
  Rng rng(12);
  const TwoStageModel ts = make_two_stage(2, small_arch(2), SmoothingKernel(KernelFamily::Laplace, 0.2, 2), rng);
  const Dataset ds = gen_rings(64, 3);
  const Tensor smoothed = ts.kernel.sample(ds.points, rng);
  const TwoStageBatchLoss l = two_stage_batch_objective(ts, ds.points, smoothed);
  CHECK(std::abs((l.prior_loss + l.denoiser_loss) + l.objective) < 1e-12 * std::max(1.0, std::abs(l.objective)));
  // the objective is the mean of the per-point joint log-likelihoods
  const auto lp = ts.prior.log_prob(Tensor(), smoothed);
  const auto ld = ts.denoiser.log_prob(smoothed, ds.points);
  double j = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) j += lp[i] + ld[i];
  CHECK(l.objective == doctest::Approx(j / 64.0).epsilon(1e-14));
}

TEST_CASE("two-stage: gaussian sigma 0.3 prior matches the smoothed density") {
  const Dataset ds = gen_two_mode_1d(20000, 13);
  const Split split = split_holdout(ds.points, 13);
  Rng rng(14);
  TwoStageModel ts = make_two_stage(1, default_arch_1d(2), SmoothingKernel(KernelFamily::Gaussian, 0.3, 1), rng);
  TrainConfig c = quick(6000, 15);
  c.learning_rate = 2e-3;
  const TwoStageTraces traces = train_two_stage(ts, split.train, c);
  CHECK(traces.prior.size() == 60);
  CHECK(traces.denoiser.size() == 60);
  // 200-step moving averages never rise above their running minimum by more than minibatch noise
  for (const LossTrace* trace : {&traces.prior, &traces.denoiser}) {
    double lowest = INFINITY;
    for (std::size_t i = 1; i < trace->size(); ++i) {
      const double avg = 0.5 * ((*trace)[i].loss + (*trace)[i - 1].loss);
      CHECK(avg <= lowest + 0.05);
      lowest = std::min(lowest, avg);
    }
  }
  // held-out smoothed points against the closed-form smoothed mixture
  const auto smoothed_modes = convolve_with_gaussian(two_mode_preset(), 0.3);
  Rng noise(16);
  const Tensor xt = ts.kernel.sample(split.heldout, noise);
  double model_nll = 0.0, true_smoothed = 0.0;
  const auto lp = ts.prior.log_prob(Tensor(), xt);
  for (std::size_t i = 0; i < lp.size(); ++i) {
    model_nll -= lp[i];
    true_smoothed -= gaussian_mixture_log_density(smoothed_modes, xt[i]);
  }
  CHECK(std::abs(model_nll - true_smoothed) / static_cast<double>(lp.size()) < 0.1);
}

TEST_CASE("two-stage: vanishing kernel makes the denoiser near-identity") {
  const Dataset ds = gen_two_mode_1d(5000, 17);
  Rng rng(18);
  TwoStageModel ts = make_two_stage(1, {{}, 2, Activation::Tanh}, SmoothingKernel(KernelFamily::Gaussian, 1e-12, 1), rng);
  TrainConfig c = quick(5000, 19);
  c.learning_rate = 5e-3;
  const TwoStageTraces traces = train_two_stage(ts, ds.points, c);
  // no hidden layer: the mean is affine in x̃, so the identity is exact.
  // Entropy floor of a logistic at the minimum scale: log(1e-4) + 2.
  const double floor = std::log(1e-4) + 2.0;
  CHECK(traces.denoiser.back().loss < floor + 0.5);
  Rng s(20);
  const TwoStageSamples out = sample_two_stage(ts, 500, s);
  double worst = 0.0;
  for (std::size_t i = 0; i < 500; ++i) worst = std::max(worst, std::abs(out.denoised[i] - out.smoothed[i]));
  CHECK(worst < 0.01);
}

TEST_CASE("grid search") {
  const Dataset ds = gen_two_mode_1d(400, 21);
  const Split split = split_holdout(ds.points, 21);
  const double one[] = {0.2};
  const GridSearchResult r = grid_search_sigma(KernelFamily::Gaussian, one, split.train, split.heldout, small_arch(1), quick(20), 4);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.best_sigma == 0.2);
  CHECK(r.best_elbo == r.rows[0].heldout_elbo);
  CHECK_THROWS_AS(grid_search_sigma(KernelFamily::Gaussian, {}, split.train, split.heldout, small_arch(1), quick(20), 4),
                  ContractError);
}

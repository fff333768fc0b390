#include <benchmark/benchmark.h>

#include <vector>

#include "smoothar/datasets.hpp"
#include "smoothar/inference.hpp"
#include "smoothar/mol.hpp"
#include "smoothar/tape.hpp"
#include "smoothar/training.hpp"

using namespace smoothar;

namespace {

Tensor uniform_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = uniform_tensor({128, n}, 1);
  const Tensor b = uniform_tensor({n, n}, 2);
  for (auto _ : state) {
    diff::Tape tape;
    const diff::Var out = diff::matmul(tape.constant(a), tape.constant(b));
    benchmark::DoNotOptimize(out.value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * 128 * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_MolLogPdf(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> raw(3 * k);
  for (double& v : raw) v = rng.normal();
  double x = 0.0;
  for (auto _ : state) {
    x += 1e-6;
    benchmark::DoNotOptimize(mol_log_pdf_raw(raw, x));
  }
}
BENCHMARK(BM_MolLogPdf)->Arg(1)->Arg(3)->Arg(10);

void BM_TwoStageTrainStep(benchmark::State& state) {
  const Dataset ds = gen_rings(4096, 4);
  Rng rng(5);
  const auto width = static_cast<std::size_t>(state.range(0));
  TwoStageModel ts = make_two_stage(2, {{width, width, width}, 3, Activation::Relu}, SmoothingKernel(KernelFamily::Gaussian, 0.1, 2), rng);
  TrainConfig cfg;
  cfg.steps = 1;
  for (auto _ : state) {
    train_two_stage(ts, ds.points, cfg);
    ++cfg.seed;
  }
}
BENCHMARK(BM_TwoStageTrainStep)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Elbo(benchmark::State& state) {
  Rng rng(6);
  const TwoStageModel ts = make_two_stage(2, {{64, 64}, 3, Activation::Relu}, SmoothingKernel(KernelFamily::Gaussian, 0.1, 2), rng);
  const Dataset ds = gen_olympics(1000, 7);
  for (auto _ : state) benchmark::DoNotOptimize(elbo(ts, ds.points, 4, rng));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Elbo)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "croloss/losses.hpp"

using namespace croloss;

namespace {

std::vector<GapVector> make_batch(int positives, int gaps, double scale) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gap(-1.0, 1.5);
  std::vector<GapVector> batch(positives);
  for (GapVector& g : batch) {
    g.sample_scale = scale;
    g.gaps.resize(gaps);
    for (double& x : g.gaps) x = gap(rng);
  }
  return batch;
}

}  // namespace

static void BM_KernelEval(benchmark::State& state) {
  const Kernel k = make_kernel(static_cast<KernelKind>(state.range(0)), 5.0);
  double x = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(k.eval(x));
    x = x > 3.0 ? -3.0 : x + 1e-3;
  }
}
BENCHMARK(BM_KernelEval)->DenseRange(1, 4);  // hinge .. softplus

static void BM_RankSmooth(benchmark::State& state) {
  const auto batch = make_batch(1, static_cast<int>(state.range(0)), 4.0);
  const Kernel k = make_kernel(KernelKind::Softplus);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rank_smooth(batch[0], k));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RankSmooth)->Range(64, 4096);

static void BM_CROLossForward(benchmark::State& state) {
  LossSpec spec;
  spec.family = LossFamily::CROLoss;
  spec.kernel = make_kernel(KernelKind::Softplus);
  spec.weighting = Weighting(1.0, 1 << 17);
  const auto batch = make_batch(static_cast<int>(state.range(0)), 2560, 4.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(croloss_forward(spec, batch).value);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2560);
}
BENCHMARK(BM_CROLossForward)->Arg(8)->Arg(64)->Arg(256);

static void BM_LambdaForward(benchmark::State& state) {
  LossSpec spec;
  spec.family = LossFamily::CROLossLambda;
  spec.kernel1 = make_kernel(KernelKind::Sigmoid);
  spec.kernel2 = make_kernel(KernelKind::Exponential);
  spec.weighting = Weighting(1.4, 1 << 17);
  const auto batch = make_batch(static_cast<int>(state.range(0)), 2560, 4.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(croloss_lambda_forward(spec, batch).value);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2560);
}
BENCHMARK(BM_LambdaForward)->Arg(8)->Arg(64)->Arg(256);

static void BM_SoftmaxCE(benchmark::State& state) {
  const auto batch = make_batch(static_cast<int>(state.range(0)), 2560, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_ce(batch).value);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2560);
}
BENCHMARK(BM_SoftmaxCE)->Arg(8)->Arg(64)->Arg(256);

BENCHMARK_MAIN();

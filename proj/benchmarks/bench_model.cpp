#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "croloss/eval.hpp"
#include "croloss/pipeline.hpp"

using namespace croloss;

namespace {

struct BenchSetup {
  TwoTowerModel model;
  std::vector<TrainingSample> samples;
  Batch batch;
};

BenchSetup make_setup(std::int64_t catalog, int n_bs, int n_rn) {
  BenchSetup s;
  ModelConfig mc;
  mc.catalog = catalog;
  mc.seed = 13;
  s.model = init_model(mc);

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::int64_t> item(0, catalog - 1);
  std::uniform_int_distribution<int> len(1, 20);
  for (int i = 0; i < n_bs; ++i) {
    TrainingSample sample;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) sample.history.push_back(item(rng));
    sample.target = item(rng);
    s.samples.push_back(std::move(sample));
    s.batch.sample_indices.push_back(i);
  }
  for (int j = 0; j < n_bs * n_rn; ++j) s.batch.shared_negatives.push_back(item(rng));
  return s;
}

}  // namespace

static void BM_ScoreBatch(benchmark::State& state) {
  const BenchSetup s = make_setup(20000, static_cast<int>(state.range(0)), 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_batch(s.model, s.batch, s.samples).gaps.size());
  }
}
BENCHMARK(BM_ScoreBatch)->Arg(64)->Arg(256);

static void BM_TrainStep(benchmark::State& state) {
  const BenchSetup s = make_setup(20000, static_cast<int>(state.range(0)), 10);
  LossSpec spec;
  spec.family = LossFamily::CROLoss;
  spec.kernel = make_kernel(KernelKind::Softplus);
  spec.weighting = Weighting(1.0, s.model.catalog);
  for (auto _ : state) {
    const ScoredBatch scored = score_batch(s.model, s.batch, s.samples);
    const LossOutput out = loss_forward(spec, scored.gaps);
    benchmark::DoNotOptimize(
        batch_backward(s.model, scored, out, 1.0).touched.size());
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(256);

static void BM_FullCatalogEval(benchmark::State& state) {
  const std::int64_t catalog = state.range(0);
  BenchSetup s = make_setup(catalog, 128, 2);
  const std::vector<int> ns{50, 100, 200, 500};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        recall_at_n(s.model, s.samples, ns).recall_at.size());
  }
  state.SetItemsProcessed(state.iterations() * catalog * s.samples.size());
}
BENCHMARK(BM_FullCatalogEval)->Arg(2000)->Arg(20000);

#include <benchmark/benchmark.h>

#include <random>

#include "ergae/explore.hpp"
#include "ergae/rules.hpp"
#include "ergae/sampling.hpp"
#include "ergae/training.hpp"

using namespace ergae;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = g(rng);
  return Tensor::matrix(rows, cols, std::move(v));
}

PreparedData arithmetic_data(std::size_t trees) {
  GeneratedData g = generate_arithmetic(trees, 7, 1);
  return prepare_dataset(apply_rules(g.schema, {}), g.entities, {0.8, 0.1, 0.1}, 1);
}

}  // namespace

static void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  ParameterStore store;
  Parameter& a = store.add("a", random_matrix(n, n, rng));
  Parameter& b = store.add("b", random_matrix(n, n, rng));
  for (auto _ : state) {
    Tape tape;
    Forward f(tape, true);
    tape.backward(sum_all(matmul(f.param(a), f.param(b))));
    benchmark::DoNotOptimize(a.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(128)->Arg(256);

static void BM_ModelStep(benchmark::State& state) {
  PreparedData data = arithmetic_data(64);
  WiringConfig w;
  w.depth = static_cast<std::size_t>(state.range(0));
  w.wiring = Wiring::kHighway;
  w.bidirectional = true;
  GraphModel model(*data.schema, data.codecs, w);
  SamplingConfig cfg;
  Batch batch = sample_batches(data.dataset, cfg, 0).front();
  for (auto _ : state) {
    Tape tape;
    Forward f(tape, true);
    tape.backward(model.forward(f, data.dataset, batch).total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_ModelStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_SampleEpoch(benchmark::State& state) {
  PreparedData data = arithmetic_data(500);
  SamplingConfig cfg;
  cfg.policy = static_cast<SamplingPolicy>(state.range(0));
  cfg.radius = 2;
  if (cfg.policy == SamplingPolicy::kConditionalIndependence) cfg.anchor_ids = {data.dataset.id(0)};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_epoch(data.dataset, cfg, seed++));
  state.SetLabel(std::string(to_string(cfg.policy)));
}
BENCHMARK(BM_SampleEpoch)->DenseRange(0, 3);

static void BM_NearestPairs(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  BottleneckTable table;
  table.size = 16;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    std::vector<double> v(table.size);
    for (auto& x : v) x = g(rng);
    table.rows.push_back({"e" + std::to_string(i), "x", std::move(v)});
  }
  PairSearchOptions options;
  options.mode = state.range(1) ? SearchMode::kApproximate : SearchMode::kExact;
  for (auto _ : state) benchmark::DoNotOptimize(nearest_pairs(table, 20, options));
}
BENCHMARK(BM_NearestPairs)->Args({1000, 0})->Args({1000, 1})->Args({4000, 0})->Args({4000, 1})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

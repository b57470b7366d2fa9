#include <benchmark/benchmark.h>

#include "byzsim/aggregation.hpp"
#include "byzsim/attacks.hpp"
#include "byzsim/dataset.hpp"
#include "byzsim/mlp.hpp"
#include "byzsim/numstats.hpp"
#include "byzsim/rng.hpp"

using namespace byzsim;

namespace {

std::vector<WorkerUpdate> make_updates(std::size_t n, std::size_t d,
                                       std::uint64_t seed) {
    Rng rng(seed);
    std::vector<WorkerUpdate> updates(n);
    for (std::size_t i = 0; i < n; ++i) {
        updates[i].worker_id = static_cast<int>(i);
        updates[i].params.resize(d);
        for (auto& v : updates[i].params) v = rng.normal();
    }
    return updates;
}

} // namespace

static void BM_NormalCdf(benchmark::State& state) {
    double z = -6.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(standard_normal_cdf(z));
        z += 1e-4;
        if (z > 6.0) z = -6.0;
    }
}
BENCHMARK(BM_NormalCdf);

static void BM_MeanAggregate(benchmark::State& state) {
    const auto updates = make_updates(51, static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mean_aggregate(updates));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MeanAggregate)->Arg(1108)->Arg(79510);

static void BM_TrimmedMeanV2(benchmark::State& state) {
    const auto updates = make_updates(51, static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(trimmed_mean(updates, 12, 2));
    }
}
BENCHMARK(BM_TrimmedMeanV2)->Arg(1108)->Arg(79510);

static void BM_KMeansDefense(benchmark::State& state) {
    const auto updates = make_updates(51, static_cast<std::size_t>(state.range(0)), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans_cluster_defense(updates, 1.0));
    }
}
BENCHMARK(BM_KMeansDefense)->Arg(1108)->Arg(79510);

static void BM_Krum(benchmark::State& state) {
    const auto updates = make_updates(51, static_cast<std::size_t>(state.range(0)), 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(krum(updates, 12));
    }
}
BENCHMARK(BM_Krum)->Arg(1108)->Arg(79510);

static void BM_Bulyan(benchmark::State& state) {
    const auto updates = make_updates(51, static_cast<std::size_t>(state.range(0)), 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bulyan(updates, 12));
    }
}
BENCHMARK(BM_Bulyan)->Arg(1108)->Arg(79510);

static void BM_CraftPreventConvergence(benchmark::State& state) {
    const auto updates = make_updates(12, static_cast<std::size_t>(state.range(0)), 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(craft_prevent_convergence(updates, 1.5));
    }
}
BENCHMARK(BM_CraftPreventConvergence)->Arg(1108)->Arg(79510);

static void BM_TrainLocalEpoch(benchmark::State& state) {
    const Dataset chunk = synth_blobs(4, 64, 5, 0.4, 7); // ~20 samples
    const MlpModel model = MlpModel::seeded_init({64, 16, 4}, 8);
    TrainingConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 1;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            train_local(model, chunk.inputs, chunk.labels, cfg, seed++));
    }
}
BENCHMARK(BM_TrainLocalEpoch);

static void BM_BackwardMnistScale(benchmark::State& state) {
    Rng rng(9);
    const MlpModel model = MlpModel::seeded_init({784, 100, 10}, 10);
    Matrix batch(83, 784);
    for (auto& v : batch.data) v = rng.uniform(0.0, 1.0);
    std::vector<int> targets(83);
    for (auto& t : targets) t = static_cast<int>(rng.index(10));
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(model, batch, targets, 1e-4));
    }
}
BENCHMARK(BM_BackwardMnistScale);

BENCHMARK_MAIN();

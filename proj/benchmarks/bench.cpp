#include <benchmark/benchmark.h>

#include <vector>

#include "dflsim/analysis.hpp"
#include "dflsim/dataset.hpp"
#include "dflsim/nn.hpp"
#include "dflsim/rng.hpp"
#include "dflsim/topology.hpp"

using namespace dflsim;

namespace {

LabeledRows random_rows(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    LabeledRows rows;
    rows.features.resize(static_cast<Eigen::Index>(n), 22);
    for (Eigen::Index i = 0; i < rows.features.size(); ++i) rows.features.data()[i] = normal(rng);
    for (std::size_t i = 0; i < n; ++i) rows.labels.push_back(static_cast<Label>(rows.features(static_cast<Eigen::Index>(i), 0) > 0));
    return rows;
}

nn::ModelArch arch_for(std::int64_t which) { return which ? nn::ModelArch::large() : nn::ModelArch::small(); }

void BM_TrainLocal(benchmark::State& state) {
    const auto rows = random_rows(static_cast<std::size_t>(state.range(1)), 1);
    const auto init = nn::init_params(arch_for(state.range(0)), 2);
    nn::TrainConfig cfg;
    for (auto _ : state) {
        auto p = init;
        nn::train_local(p, rows, cfg);
        benchmark::DoNotOptimize(p);
    }
    state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_TrainLocal)->Args({0, 689})->Args({1, 689})->Args({1, 2514})->Unit(benchmark::kMillisecond);

void BM_FederatedAverage(benchmark::State& state) {
    const auto arch = arch_for(1);
    std::vector<nn::ModelParams> models;
    for (std::int64_t i = 0; i <= state.range(0); ++i) models.push_back(nn::init_params(arch, static_cast<std::uint64_t>(i)));
    const std::vector<nn::ModelParams> received(models.begin() + 1, models.end());
    for (auto _ : state) benchmark::DoNotOptimize(nn::federated_average(models[0], received));
}
BENCHMARK(BM_FederatedAverage)->Arg(1)->Arg(8)->Arg(32);

void BM_ConnectedComponents(benchmark::State& state) {
    topo::MobilitySpec spec;
    spec.node_count = static_cast<std::size_t>(state.range(0));
    spec.snapshot_count = 1;
    spec.seed = 3;
    const auto series = topo::generate_mobility_topology(spec);
    for (auto _ : state) benchmark::DoNotOptimize(topo::connected_components(series.snapshots[0], spec.node_count));
}
BENCHMARK(BM_ConnectedComponents)->Arg(100)->Arg(1000);

void BM_NodeNetStats(benchmark::State& state) {
    topo::MobilitySpec spec;
    spec.seed = 4;
    const auto series = topo::generate_mobility_topology(spec);
    for (auto _ : state) benchmark::DoNotOptimize(topo::node_net_stats(series));
}
BENCHMARK(BM_NodeNetStats);

void BM_Spearman(benchmark::State& state) {
    Rng rng(5);
    std::normal_distribution<double> normal;
    std::vector<double> x(static_cast<std::size_t>(state.range(0))), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = normal(rng);
        y[i] = x[i] + normal(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(analysis::spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(94)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();

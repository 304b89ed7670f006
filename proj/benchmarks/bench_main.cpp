#include <vector>

#include <benchmark/benchmark.h>

#include "cavar/backtest.hpp"
#include "cavar/ddqn.hpp"
#include "cavar/evt.hpp"
#include "cavar/garch.hpp"
#include "cavar/rng.hpp"
#include "cavar/simulate.hpp"

namespace {

using namespace cavar;

const garch::Params kTruth{0.0, 1e-6, 0.08, 0.90, 0.0, 0.0};

void BM_GarchNll(benchmark::State& state) {
    const auto path = simulate::simulate_garch(kTruth, {}, static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(garch::negative_log_likelihood(path.returns.values, {}, kTruth));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GarchNll)->Arg(1000)->Arg(5000);

void BM_GarchFit(benchmark::State& state) {
    const auto path = simulate::simulate_garch(kTruth, {}, 5000, 1);
    for (auto _ : state) benchmark::DoNotOptimize(garch::fit_mle(path.returns.values, {}));
}
BENCHMARK(BM_GarchFit)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    Rng rng(1, "bench.ddqn");
    ddqn::QNetwork online({14, 96, 64, 2}, rng);
    const ddqn::QNetwork target = online;
    ddqn::Adam adam(online, 5e-4);
    std::vector<ddqn::Transition> pool(64);
    for (auto& t : pool) {
        t.state.resize(14);
        t.next_state.resize(14);
        for (double& x : t.state) x = rng.uniform();
        for (double& x : t.next_state) x = rng.uniform();
        t.action = static_cast<int>(rng.below(2));
        t.reward = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    std::vector<const ddqn::Transition*> batch;
    for (const auto& t : pool) batch.push_back(&t);
    for (auto _ : state) benchmark::DoNotOptimize(ddqn::train_step(online, target, batch, 0.95, adam));
}
BENCHMARK(BM_TrainStep);

void BM_Wilcoxon(benchmark::State& state) {
    Rng rng(2, "bench.wilcoxon");
    std::vector<double> a(static_cast<std::size_t>(state.range(0))), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal() + 0.3;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(backtest::wilcoxon_signed_rank(a, b, backtest::Alternative::Less));
    }
}
BENCHMARK(BM_Wilcoxon)->Arg(8)->Arg(50)->Arg(500);

void BM_KsTest(benchmark::State& state) {
    const auto x = simulate::simulate_gpd(0.01, 0.3, 200, 3);
    const evt::GpdParams p = evt::fit_gpd_mle(x).params;
    for (auto _ : state) benchmark::DoNotOptimize(evt::ks_test(x, p, {}));
}
BENCHMARK(BM_KsTest)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

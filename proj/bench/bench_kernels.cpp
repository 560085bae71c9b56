// Serial reference vs OpenMP kernels on the 40x40 pendulum benchmark.

#include <benchmark/benchmark.h>

#include "pfstab/config.hpp"
#include "pfstab/lp.hpp"
#include "pfstab/verify.hpp"

using namespace pfstab;

namespace {

RunConfig bench_config(std::size_t n) {
    RunConfig c = default_config();
    c.grid.counts = {n, n};
    c.out_of_domain = OutOfDomain::Clamp;
    return c;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

void set_label(benchmark::State& state) { state.SetLabel(state.range(0) ? "openmp" : "serial"); }

void BM_BuildPfMatrix(benchmark::State& state) {
    const RunConfig cfg = bench_config(40);
    const Partition p = make_partition(cfg);
    const auto model = make_model(cfg);
    const auto samples = make_sample_set(p, cfg.samples_per_cell, cfg.scheme, cfg.seed);
    const Exec exec = exec_of(state);
    for (auto _ : state)
        benchmark::DoNotOptimize(build_pf_matrix(*model, p, Point{20.0}, Point{0.05}, samples, exec));
    set_label(state);
}

void BM_ReducedCosts(benchmark::State& state) {
    const RunConfig cfg = bench_config(40);
    const auto e = build_ensemble(*make_model(cfg), QuadraticCost{}, make_partition(cfg), make_controls(cfg),
                                  make_noise(cfg), make_build_options(cfg));
    const auto lp = assemble_lp(e, 1.01);
    const std::vector<double> value(lp.state_count(), 1.0);
    const Exec exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(reduced_costs(lp, value, exec));
    set_label(state);
}

void BM_BasinFraction(benchmark::State& state) {
    const RunConfig cfg = bench_config(40);
    const Partition p = make_partition(cfg);
    const auto model = make_model(cfg);
    const NoiseModel noise = make_noise(cfg);
    Policy pol = constant_policy(p, {0.0});
    pol.local_gain = {-188.4, -45.2};
    VerifyOptions vo;
    vo.inits_per_cell = 2;
    vo.seed = 1;
    const Exec exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(basin_fraction(*model, pol, p, {&noise, {}}, vo, {}, exec));
    set_label(state);
}

}  // namespace

BENCHMARK(BM_BuildPfMatrix)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ReducedCosts)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_BasinFraction)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

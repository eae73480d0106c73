#include <layergen/envelope.hpp>
#include <layergen/geometry.hpp>
#include <layergen/ode_kernel.hpp>
#include <layergen/reaction.hpp>
#include <layergen/solver.hpp>

#include <benchmark/benchmark.h>

#include <cmath>

using namespace layergen;

namespace {

const BistableReaction f = BistableReaction::cubic(0.3);

void BM_flow(benchmark::State& state) {
    const KernelConfig cfg;
    const double tau = static_cast<double>(state.range(0));
    double xi = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(flow(f, cfg, tau, xi));
        xi = xi < 1.5 ? xi + 0.01 : -1.5;
    }
}
BENCHMARK(BM_flow)->Arg(1)->Arg(10)->Arg(25);

void BM_step_diffusion(benchmark::State& state) {
    const RadialGrid grid(2, 1.0, static_cast<std::size_t>(state.range(0)));
    const Field u = build_u0(grid, InitialProfile{}, 0.3);
    SolverConfig cfg;
    const double dt = cfl_dt(cfg, grid, u);
    for (auto _ : state) benchmark::DoNotOptimize(step_diffusion(cfg, grid, u, dt));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_step_diffusion)->RangeMultiplier(2)->Range(256, 4096);

void BM_strang_step(benchmark::State& state) {
    const RadialGrid grid(2, 1.0, static_cast<std::size_t>(state.range(0)));
    const Field u = build_u0(grid, InitialProfile{}, 0.3);
    SolverConfig cfg;
    const double dt = 0.5 * cfl_dt(cfg, grid, u);
    for (auto _ : state) benchmark::DoNotOptimize(strang_step(cfg, &f, grid, u, dt));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_strang_step)->RangeMultiplier(2)->Range(256, 4096);

void BM_envelope_residual(benchmark::State& state) {
    const InitialProfile profile;
    const EnvelopeParams p{0.01, 512.0, 0.21, 2};
    const Envelope env(p, profile, f, envelope_kernel(KernelConfig{}, profile, p));
    double rho = 0.01;
    for (auto _ : state) {
        benchmark::DoNotOptimize(env.residual_L(rho, 0.3 * env.t_eps(), Side::plus));
        rho = rho < 0.6 ? rho + 0.001 : 0.01;
    }
}
BENCHMARK(BM_envelope_residual);

} // namespace

BENCHMARK_MAIN();

#include <cmath>

#include <benchmark/benchmark.h>

#include "ek/model.hpp"
#include "ek/normalform.hpp"
#include "ek/propagator.hpp"
#include "ek/resonance.hpp"

namespace {

using ek::spectral::Field;
using ek::spectral::Space;

Field bump(int dim, int n) {
    auto g = ek::spectral::make_grid(dim, n, 32 * M_PI);
    Field f = Field::zeros(g, Space::physical);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.x(i);
        double r2 = 0.0;
        for (int d = 0; d < dim; ++d) r2 += (x[d] - 0.5 * g.L) * (x[d] - 0.5 * g.L);
        f.values[i] = {1e-3 * std::exp(-r2 / 18), 1e-3 * std::exp(-r2 / 18)};
    }
    return ek::spectral::to_fourier(f);
}

ek::model::ModelParams qmodel() {
    return ek::model::normalize(ek::model::make_params(1.0, ek::model::quantum_capillarity(1.0),
                                                       ek::model::power_pressure(2.0, 1.0, 1.0)));
}

void BM_Fft(benchmark::State& st) {
    Field f = bump(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(ek::spectral::to_physical(f));
}
BENCHMARK(BM_Fft)->Args({1, 1024})->Args({2, 256})->Args({3, 64});

void BM_Nonlinearity(benchmark::State& st) {
    auto p = qmodel();
    Field f = bump(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(ek::propagator::nonlinearity(p, f));
}
BENCHMARK(BM_Nonlinearity)->Args({1, 1024})->Args({2, 256})->Args({3, 64});

void BM_Step(benchmark::State& st) {
    auto p = qmodel();
    ek::propagator::IntegratorConfig cfg;
    cfg.scheme = st.range(0) ? ek::propagator::Scheme::exponential_rk4 : ek::propagator::Scheme::strang_splitting;
    Field f = bump(1, 1024);
    for (auto _ : st) benchmark::DoNotOptimize(ek::propagator::step(p, cfg, f, 0.05));
}
BENCHMARK(BM_Step)->Arg(0)->Arg(1);

void BM_Bilinear(benchmark::State& st) {
    auto nf = ek::normalform::make_params(0.5);
    Field f = bump(1, static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(ek::normalform::bilinear_apply(nf.B, f, f));
}
BENCHMARK(BM_Bilinear)->Arg(256)->Arg(1024);

void BM_Phase(benchmark::State& st) {
    const ek::resonance::PhaseSpec spec{-1, 1};
    double x = 0.1;
    for (auto _ : st) {
        benchmark::DoNotOptimize(ek::resonance::phase(spec, {x, 0.2, 0.0}, {0.3, -0.1, 0.4}));
        x += 1e-9;
    }
}
BENCHMARK(BM_Phase);

void BM_BlockNorm(benchmark::State& st) {
    ek::resonance::SymbolUnderTest sym;
    sym.region = ek::resonance::Region::time_nonresonant;
    ek::resonance::NormConfig cfg;
    cfg.xi_samples = 1;
    for (auto _ : st) benchmark::DoNotOptimize(ek::resonance::block_norm(sym, {1.0 / 16, 1.0 / 256, 1.0 / 16}, 1.0, cfg));
}
BENCHMARK(BM_BlockNorm)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

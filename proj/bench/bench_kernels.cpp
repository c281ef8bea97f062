// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "curvcone/bending.hpp"
#include "curvcone/conditions.hpp"
#include "curvcone/conformal.hpp"
#include "curvcone/parallel.hpp"

using namespace curvcone;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::Parallel : Exec::Serial; }

void label(benchmark::State& s) { s.SetLabel(s.range(0) ? "parallel x" + std::to_string(max_threads()) : "serial"); }

void BM_MarginSearch(benchmark::State& state) {
    CurvatureOperator R = random_operator(5, 3);
    Condition c = Condition::sec_almost_nonneg(0.1);
    c.opt.multistarts = 128;
    c.opt.exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(margin(c, R));
    label(state);
}

void BM_OrbitAverage(benchmark::State& state) {
    CurvatureOperator R = random_operator(4, 5);
    for (auto _ : state) benchmark::DoNotOptimize(orbit_average(R, 3, 20000, 1, exec_of(state)).residual);
    label(state);
}

struct RoundBend {
    RotSymModel m = RotSymModel::round_sphere_point(4);
    Condition c = Condition::scal_positive();
    AngleProfile p;
    RoundBend() {
        auto k = estimate_constants(m, c, 0.5);
        auto p1 = initial_bend(k);
        p = inductive_bend_log(p1, k, reachable_log_radius(p1, k) - 1.0);
    }
};

void BM_VerifyBend(benchmark::State& state) {
    static RoundBend b;
    VerifyGrid g;
    g.per_segment = 3;
    g.exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(verify_bend(b.m, b.c, b.p, g).min_margin);
    label(state);
}

void BM_BlendFit(benchmark::State& state) {
    auto ff = FlatteningFactor::round_sphere(4);
    BlendGrid g;
    g.radii = 24;
    g.exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(blend_bounds(ff, {0.1, 0.05}, g).C1);
    label(state);
}

void BM_VerifyConformal(benchmark::State& state) {
    auto ff = FlatteningFactor::round_sphere(4);
    auto c = Condition::scal_positive();
    ConformalGrid g;
    g.radii = 24;
    g.exec = exec_of(state);
    double lg = conformal_setup(ff, c, g).log_gamma_max - 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(verify_conformal_log(ff, c, lg, g).min_margin);
    label(state);
}

}  // namespace

BENCHMARK(BM_MarginSearch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OrbitAverage)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VerifyBend)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlendFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VerifyConformal)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

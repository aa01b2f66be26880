#include <benchmark/benchmark.h>

#include "qrs/asymptotics.hpp"
#include "qrs/qr_solver.hpp"
#include "qrs/sim_harness.hpp"

using namespace qrs;

namespace {

PartitionedDesign make_instance(Index n, Index p, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix X = generate_design(n, p, 0.5, rng);
    const Vector beta = make_coefficients(p / 2, p - p / 2, 0.0);
    const Vector y = X * beta + sample_errors(ErrorDist::normal, n, rng);
    Matrix Z(n, p + 1);
    Z.col(0).setOnes();
    Z.rightCols(p) = X;
    return make_design(Z, y, 0.5, p / 2 + 1, p - p / 2);
}

void bm_fit_full(benchmark::State& state) {
    const PartitionedDesign design =
        make_instance(state.range(0), state.range(1), 17);
    for (auto _ : state) benchmark::DoNotOptimize(fit_full(design).objective);
}
BENCHMARK(bm_fit_full)->Args({200, 6})->Args({1000, 10})->Args({4000, 10});

void bm_penalized_path(benchmark::State& state) {
    const PartitionedDesign design = make_instance(100, 8, 18);
    const double mix = static_cast<double>(state.range(0)) / 2.0;
    const Vector grid = default_lambda_grid(design, mix, 50);
    for (auto _ : state)
        benchmark::DoNotOptimize(fit_penalized(design, mix, grid).lambdas.size());
}
BENCHMARK(bm_penalized_path)->Arg(0)->Arg(1)->Arg(2);

void bm_noncentral_cdf(benchmark::State& state) {
    double x = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(noncentral_chisq_cdf(x, 7, 3.0));
        x = x < 40.0 ? x + 0.01 : 1.0;
    }
}
BENCHMARK(bm_noncentral_cdf);

void bm_truncated_inv_moment(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(truncated_inv_moment(7, 2.0, 1, 11.07));
}
BENCHMARK(bm_truncated_inv_moment);

} // namespace

BENCHMARK_MAIN();

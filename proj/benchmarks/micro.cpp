#include <benchmark/benchmark.h>

#include <random>

#include "rsddp/cutpool.hpp"
#include "rsddp/engine.hpp"
#include "rsddp/storage.hpp"
#include "rsddp/subproblem.hpp"

using namespace rsddp;

namespace {

// Feasible and bounded: b = A x0 with x0 > 0, c > 0.
SubproblemSpec random_spec(int m, int n, bool quadratic, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SubproblemSpec spec;
    spec.A = Matrix::NullaryExpr(m, n, [&] { return u(rng); });
    Vector x0 = Vector::NullaryExpr(n, [&] { return 1.0 + u(rng); });
    spec.rhs = spec.A * x0;
    spec.c = Vector::NullaryExpr(n, [&] { return 1.5 + u(rng); });
    if (quadratic) {
        const int q = n / 2;
        Matrix L = Matrix::NullaryExpr(q, q, [&] { return u(rng); });
        spec.quad = QuadraticTerm{1.0, L * L.transpose()};
    }
    return spec;
}

void BM_SolveLP(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SubproblemSpec spec = random_spec(n / 2, n, false, 7);
    for (auto _ : state) benchmark::DoNotOptimize(solve_lp(spec).objective);
}
BENCHMARK(BM_SolveLP)->Arg(20)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_SolveQP(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SubproblemSpec spec = random_spec(n / 2, n, true, 7);
    for (auto _ : state) benchmark::DoNotOptimize(solve_qp(spec).objective);
}
BENCHMARK(BM_SolveQP)->Arg(20)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_WarmResolve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SubproblemSpec spec = random_spec(n / 2, n, false, 11);
    WarmStart warm;
    solve_lp(spec, {}, &warm);
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.9, 1.1);
    const Vector base = spec.rhs;
    for (auto _ : state) {
        spec.rhs = base * u(rng);
        benchmark::DoNotOptimize(solve_lp(spec, {}, &warm).objective);
    }
}
BENCHMARK(BM_WarmResolve)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_CutEvaluate(benchmark::State& state) {
    const int cuts = static_cast<int>(state.range(0));
    const int dim = 10;
    CutPool pool({dim}, {1});
    Rng rng(5);
    std::normal_distribution<double> g;
    for (int j = 0; j < cuts; ++j) {
        Cut cut;
        cut.alpha = g(rng);
        cut.beta = Vector::NullaryExpr(dim, [&] { return g(rng); });
        cut.anchor = Vector::NullaryExpr(dim, [&] { return g(rng); });
        pool.add_cut(0, 0, std::move(cut));
    }
    const Vector R = Vector::Ones(dim);
    for (auto _ : state) benchmark::DoNotOptimize(pool.evaluate(0, 0, R));
}
BENCHMARK(BM_CutEvaluate)->Arg(100)->Arg(1000)->Arg(10000);

// Five SDDP iterations from an empty pool on a small storage network.
void BM_StorageIterations(benchmark::State& state) {
    StorageNetworkParams params;
    params.n_storage = static_cast<int>(state.range(0));
    params.T = 12;
    Rng gen(1);
    const MultistageProblem problem = generate_storage_instance(params, gen);
    EngineConfig config;
    config.regularized = state.range(1) != 0;
    config.ub_every = 0;
    for (auto _ : state) {
        Engine engine(problem, config);
        for (int k = 0; k < 5; ++k) benchmark::DoNotOptimize(engine.iterate());
    }
}
BENCHMARK(BM_StorageIterations)
    ->ArgsProduct({{2, 5}, {0, 1}})
    ->ArgNames({"n_storage", "regularized"})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <numeric>

#include "wbsgd/kernels.hpp"
#include "wbsgd/rng.hpp"

namespace {

using namespace wbsgd;

struct Fixture {
  DenseMatrix A;
  Vector rhs;
  std::vector<Index> rows;
  Vector x;
  Vector residuals;
  Vector out;

  Fixture(std::size_t b, std::size_t m) {
    Rng rng(3);
    std::normal_distribution<double> normal;
    std::vector<double> data(b * m);
    for (auto& v : data) v = normal(rng);
    A = DenseMatrix(b, m, std::move(data));
    rhs.resize(b);
    for (auto& v : rhs) v = normal(rng);
    rows.resize(b);
    std::iota(rows.begin(), rows.end(), Index{0});
    x.assign(m, 0.5);
    residuals.resize(b);
    out.resize(m);
  }
};

void BM_ResidualSumSerial(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    kernels::serial::residual_sum(f.A, f.rhs, f.rows, f.x, f.residuals, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
}

void BM_ResidualSumParallel(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    kernels::residual_sum(f.A, f.rhs, f.rows, f.x, f.residuals, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
}

}  // namespace

BENCHMARK(BM_ResidualSumSerial)->Args({8, 50})->Args({64, 512})->Args({256, 2048});
BENCHMARK(BM_ResidualSumParallel)->Args({8, 50})->Args({64, 512})->Args({256, 2048});

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <trimfit/ilts.hpp>
#include <trimfit/model.hpp>

namespace {

using namespace trimfit;

Instance make_instance(std::size_t n, std::size_t d) {
  Matrix theta = Matrix::Zero(static_cast<Eigen::Index>(d), 2);
  theta(0, 0) = 1.0;
  theta(0, 1) = -1.0;
  return generate_mlrc(MixtureSpec::balanced(theta), {0.05, Adversary::oblivious_random, 10.0}, n, 42);
}

void BM_SelectTrimmedSet(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto inst = make_instance(n, 20);
  const Vector theta = inst.truth.theta_star.col(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_trimmed_set(inst.data, theta, n * 2 / 5));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SelectTrimmedSet)->Arg(1000)->Arg(4000)->Arg(16000);

void BM_LeastSquares(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const auto inst = make_instance(n, d);
  const IndexSet rows = select_trimmed_set(inst.data, inst.truth.theta_star.col(0), n * 2 / 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(least_squares(inst.data, rows));
  }
}
BENCHMARK(BM_LeastSquares)->Args({4000, 10})->Args({4000, 20})->Args({16000, 40});

void BM_IltsRun(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto inst = make_instance(n, 20);
  const Matrix& theta = inst.truth.theta_star;
  const Vector theta0 = theta.col(0) + 0.2 * (theta.col(1) - theta.col(0));
  IltsConfig cfg;
  cfg.tau = 0.4;
  cfg.max_rounds = 30;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ilts_run(inst.data, theta0, cfg));
  }
}
BENCHMARK(BM_IltsRun)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

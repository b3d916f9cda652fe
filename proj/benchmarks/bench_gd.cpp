#include <benchmark/benchmark.h>

#include <trimfit/gd_ilts.hpp>
#include <trimfit/ilts.hpp>
#include <trimfit/model.hpp>

namespace {

using namespace trimfit;

void BM_GdInnerLoop(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto steps = static_cast<std::size_t>(state.range(1));
  Matrix theta = Matrix::Zero(20, 2);
  theta(0, 0) = 1.0;
  theta(0, 1) = -1.0;
  const auto inst = generate_mlrc(MixtureSpec::balanced(theta), {}, n, 7);
  const IndexSet rows = select_trimmed_set(inst.data, theta.col(0), n * 2 / 5);
  const double eta = 1.0 / estimate_lipschitz(inst.data, rows);
  const Vector start = Vector::Zero(20);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gd_inner_loop(inst.data, rows, start, eta, steps));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(steps));
}
BENCHMARK(BM_GdInnerLoop)->Args({4000, 10})->Args({4000, 100})->Unit(benchmark::kMicrosecond);

void BM_EstimateLipschitz(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix theta = Matrix::Identity(20, 2);
  const auto inst = generate_mlrc(MixtureSpec::balanced(theta), {}, n, 8);
  const IndexSet rows = select_trimmed_set(inst.data, theta.col(0), n / 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_lipschitz(inst.data, rows));
  }
}
BENCHMARK(BM_EstimateLipschitz)->Arg(4000);

}  // namespace

#include <benchmark/benchmark.h>

#include "gcvae/kernels.hpp"
#include "gcvae/rng.hpp"

namespace {

using gcvae::Matrix;

struct Problem {
  Matrix X, W, dY, Y, dX, dW;
  std::vector<double> b, db;
};

Problem make_problem(std::size_t n, std::size_t in, std::size_t out) {
  gcvae::Rng rng(42);
  Problem p;
  p.X = gcvae::sample_standard_normal(rng, n, in);
  p.W = gcvae::sample_standard_normal(rng, out, in);
  p.dY = gcvae::sample_standard_normal(rng, n, out);
  p.b.assign(out, 0.1);
  p.Y = Matrix(n, out);
  p.dX = Matrix(n, in);
  p.dW = Matrix(out, in);
  p.db.assign(out, 0.0);
  return p;
}

template <bool Parallel>
void BM_forward(benchmark::State& state) {
  auto p = make_problem(static_cast<std::size_t>(state.range(0)), 64, 64);
  for (auto _ : state) {
    if constexpr (Parallel) gcvae::kernels::affine_forward(p.X, p.W, p.b, p.Y);
    else gcvae::kernels::reference::affine_forward(p.X, p.W, p.b, p.Y);
    benchmark::DoNotOptimize(p.Y.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_backward_input(benchmark::State& state) {
  auto p = make_problem(static_cast<std::size_t>(state.range(0)), 64, 64);
  for (auto _ : state) {
    if constexpr (Parallel) gcvae::kernels::affine_backward_input(p.dY, p.W, p.dX);
    else gcvae::kernels::reference::affine_backward_input(p.dY, p.W, p.dX);
    benchmark::DoNotOptimize(p.dX.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_backward_params(benchmark::State& state) {
  auto p = make_problem(static_cast<std::size_t>(state.range(0)), 64, 64);
  for (auto _ : state) {
    if constexpr (Parallel) gcvae::kernels::affine_backward_params(p.dY, p.X, p.dW, p.db);
    else gcvae::kernels::reference::affine_backward_params(p.dY, p.X, p.dW, p.db);
    benchmark::DoNotOptimize(p.dW.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_forward<false>)->Name("forward/serial")->Arg(128)->Arg(4096);
BENCHMARK(BM_forward<true>)->Name("forward/parallel")->Arg(128)->Arg(4096);
BENCHMARK(BM_backward_input<false>)->Name("backward_input/serial")->Arg(128)->Arg(4096);
BENCHMARK(BM_backward_input<true>)->Name("backward_input/parallel")->Arg(128)->Arg(4096);
BENCHMARK(BM_backward_params<false>)->Name("backward_params/serial")->Arg(128)->Arg(4096);
BENCHMARK(BM_backward_params<true>)->Name("backward_params/parallel")->Arg(128)->Arg(4096);

BENCHMARK_MAIN();

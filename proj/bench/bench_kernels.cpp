// Serial reference vs OpenMP kernels, plus the heatmap feature pass that dominates rendering.

#include <benchmark/benchmark.h>

#include "heterloss/heatmap.hpp"
#include "heterloss/kernels.hpp"
#include "heterloss/rng.hpp"
#include "heterloss/synthetic.hpp"

using namespace heterloss;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

// Hidden layer of the shared network on one mini-batch: 1024 x 64 -> 64.
constexpr std::size_t kBatch = 1024, kIn = 64, kOut = 64;

template <auto Fn>
void BM_forward(benchmark::State& state) {
  const Matrix x = random_matrix(kBatch, kIn, 1), w = random_matrix(kOut, kIn, 2);
  const std::vector<double> b(kOut, 0.1);
  Matrix y(kBatch, kOut);
  for (auto _ : state) {
    Fn(x, w, b, y);
    benchmark::DoNotOptimize(y.values().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kBatch));
}

template <auto Fn>
void BM_backward_params(benchmark::State& state) {
  const Matrix x = random_matrix(kBatch, kIn, 1), dy = random_matrix(kBatch, kOut, 3);
  Matrix dw(kOut, kIn);
  std::vector<double> db(kOut);
  for (auto _ : state) {
    Fn(dy, x, dw, db);
    benchmark::DoNotOptimize(dw.values().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kBatch));
}

template <auto Fn>
void BM_backward_input(benchmark::State& state) {
  const Matrix w = random_matrix(kOut, kIn, 2), dy = random_matrix(kBatch, kOut, 3);
  Matrix dx(kBatch, kIn);
  for (auto _ : state) {
    Fn(dy, w, dx);
    benchmark::DoNotOptimize(dx.values().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kBatch));
}

void BM_heatmap(benchmark::State& state) {
  const auto backend = state.range(0) == 0 ? kernels::Backend::Serial : kernels::Backend::OpenMP;
  kernels::ScopedBackend scope(backend);
  const auto map = generate_demo_map(7, 120, 5.0);
  HeatmapJob job;
  job.surface = map.dsm;
  job.ground = map.dtm;
  job.tx = {60, 60};
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = 20;
  auto model = build_default(ArchitectureKind::Shared, 3, 1);
  model.normalizer = fit_normalizer(generate_synthetic(spec));
  const PathLossModel pm = model;
  for (auto _ : state) benchmark::DoNotOptimize(render_heatmap(job, pm).predicted);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 120 * 120));
}

}  // namespace

BENCHMARK(BM_forward<kernels::serial::affine_forward>)->Name("affine_forward/serial");
BENCHMARK(BM_forward<kernels::omp::affine_forward>)->Name("affine_forward/openmp");
BENCHMARK(BM_backward_params<kernels::serial::affine_backward_params>)->Name("affine_backward_params/serial");
BENCHMARK(BM_backward_params<kernels::omp::affine_backward_params>)->Name("affine_backward_params/openmp");
BENCHMARK(BM_backward_input<kernels::serial::affine_backward_input>)->Name("affine_backward_input/serial");
BENCHMARK(BM_backward_input<kernels::omp::affine_backward_input>)->Name("affine_backward_input/openmp");
BENCHMARK(BM_heatmap)->Arg(0)->Arg(1)->ArgName("openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

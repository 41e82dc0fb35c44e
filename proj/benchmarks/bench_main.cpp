#include <benchmark/benchmark.h>

#include "cdpforge/data.hpp"
#include "cdpforge/learning.hpp"
#include "cdpforge/solver.hpp"

using namespace cdpforge;

namespace {

void BM_fft2u(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Complex2D a(n, n);
  for (auto& v : a) v = {rng.normal(), rng.normal()};
  for (auto _ : state) {
    fft2u_inplace(a);
    benchmark::DoNotOptimize(a[0]);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_fft2u)->Arg(8)->Arg(32)->Arg(64)->Arg(200)->Arg(256);

// Single-image reconstruction at the paper's default size: T = 4, K = 50, 32x32.
void BM_solve_cdp(benchmark::State& state) {
  const auto image = synth_dataset(SynthKind::random_smooth, 1, 32, 32, 3)[0].image;
  Rng rng(2);
  const auto masks = random_patterns(4, {32, 32}, rng);
  const auto meas = measure(image, masks);
  SolverConfig cfg;
  cfg.iterations = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto res = solve_cdp(meas, masks, cfg);
    benchmark::DoNotOptimize(res.estimate.plane()[0]);
  }
}
BENCHMARK(BM_solve_cdp)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

// One training step's worth of reverse-mode work for a single image.
void BM_pattern_gradient(benchmark::State& state) {
  const auto batch = signals_of(synth_dataset(SynthKind::blobs, 1, 32, 32, 4));
  TrainConfig cfg;
  cfg.threads = 1;
  cfg.grad_mode = state.range(0) == 0 ? GradMode::phase_detached : GradMode::full;
  const auto params = initial_params({32, 32}, cfg);
  for (auto _ : state) {
    auto g = pattern_gradient(params, batch, cfg);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetLabel(std::string(to_string(cfg.grad_mode)));
}
BENCHMARK(BM_pattern_gradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "gcwave/escape.hpp"
#include "gcwave/flow.hpp"
#include "gcwave/sampling.hpp"
#include "gcwave/solver.hpp"

using namespace gcwave;

namespace {

MetricModel bench_metric() {
  return MetricModel::trapped_shell(4.0, 8.0, 1.6)
      .with_damping(DampingProfile({{{0, 0, 0}, 14.0, 1.0}}));
}

void BM_MetricJet(benchmark::State& state) {
  auto m = bench_metric();
  MetricJet j;
  double t = 0.0;
  for (auto _ : state) {
    m.jet({5.0 + 1e-6 * t, 1.0, -2.0}, j);
    benchmark::DoNotOptimize(j);
    t += 1.0;
  }
}
BENCHMARK(BM_MetricJet);

void BM_BGrad(benchmark::State& state) {
  auto m = bench_metric();
  const PhasePoint pt{{5.0, 1.0, -2.0}, {0.3, 0.9, 0.1}};
  for (auto _ : state) {
    auto b = b_pm_grad(m, pt, Branch::plus);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_BGrad);

void BM_HalfOrbit(benchmark::State& state) {
  auto m = bench_metric();
  const PhasePoint w0 = phi_scale(m, {{5.267, 0, 0}, {0, 1, 0}}, Branch::plus);
  const double span = static_cast<double>(state.range(0));
  for (auto _ : state) {
    auto tr = integrate_half(m, Branch::plus, w0, 0.0, span);
    benchmark::DoNotOptimize(tr.conserved_drift);
  }
}
BENCHMARK(BM_HalfOrbit)->Arg(10)->Arg(100);

void BM_ClassifyRay(benchmark::State& state) {
  auto m = bench_metric();
  ClassifyParams p;
  p.R = 16.0;
  p.delta = 1.6;
  p.t_max = 200.0;
  const PhasePoint w0 = phi_scale(m, {{12.0, 3.0, 0}, {0.4, 0.8, 0.2}}, Branch::plus);
  for (auto _ : state) {
    auto rc = classify_ray(m, Branch::plus, w0, p);
    benchmark::DoNotOptimize(rc.verdict);
  }
}
BENCHMARK(BM_ClassifyRay);

void BM_Halton(benchmark::State& state) {
  HaltonSampler hs(7, 1);
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hs.sample(static_cast<int>(i % 7), i));
    ++i;
  }
}
BENCHMARK(BM_Halton);

void BM_WaveStep(benchmark::State& state) {
  auto m = bench_metric();
  const int n = static_cast<int>(state.range(0));
  GridSpec g;
  g.n = n;
  g.extent = 16.0;
  g.sponge_width = std::max(3.0, 4.5 * g.h());
  g.snapshot_dt = 1e9;  // no snapshots inside the timed region
  WaveData data;
  data.u0 = bump_data({5.0, 0, 0}, 3.0, 1.0);
  const double dt = 0.4 * g.h() / std::sqrt(m.C_ell());
  for (auto _ : state) {
    EvolveOptions opt;
    opt.n_threads = 2;
    opt.t_checkpoints = {8.0 * dt};
    auto hist = evolve(m, g, data, nullptr, 8.0 * dt, opt);
    benchmark::DoNotOptimize(hist.energy_trace.back().energy);
  }
  state.SetItemsProcessed(state.iterations() * 8 * static_cast<std::int64_t>(n) * n * n);
}
BENCHMARK(BM_WaveStep)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

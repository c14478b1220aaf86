#include <benchmark/benchmark.h>

#include "pa/attacks.hpp"
#include "pa/grad.hpp"
#include "pa/metrics.hpp"
#include "pa/random.hpp"

namespace {

pa::Tensor noise(std::uint64_t seed, std::size_t c, std::size_t n, double lo = -1.0, double hi = 1.0) {
  pa::Rng rng(seed);
  pa::Tensor t({c, n, n});
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = pa::uniform(rng, lo, hi);
  return t;
}

std::unique_ptr<pa::Metric> metric_for(int which) {
  switch (which) {
    case 0: return std::make_unique<pa::L2Metric>();
    case 1: return std::make_unique<pa::SsimMetric>();
    case 2: return std::make_unique<pa::MsSsimMetric>();
    default: return std::make_unique<pa::ConvMetric>(pa::random_conv_weights(1, 3, {16, 32, 32}));
  }
}

const char* kNames[] = {"l2", "ssim", "msssim", "conv"};

void BM_MetricForward(benchmark::State& state) {
  const auto m = metric_for(static_cast<int>(state.range(0)));
  const auto n = static_cast<std::size_t>(state.range(1));
  const pa::Tensor a = noise(1, 3, n), b = noise(2, 3, n);
  for (auto _ : state) benchmark::DoNotOptimize((*m)(a, b));
  state.SetLabel(kNames[state.range(0)]);
  state.SetItemsProcessed(state.iterations());
}

void BM_MetricGradient(benchmark::State& state) {
  const auto m = metric_for(static_cast<int>(state.range(0)));
  const auto n = static_cast<std::size_t>(state.range(1));
  const pa::Tensor a = noise(1, 3, n), b = noise(2, 3, n);
  for (auto _ : state) {
    pa::grad::Graph g;
    const pa::grad::Var av = g.leaf(a);
    const pa::grad::Var d = m->distance(g.constant(b), av);
    benchmark::DoNotOptimize(g.backward(d).of(av));
  }
  state.SetLabel(kNames[state.range(0)]);
}

void BM_BilinearWarp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const pa::Tensor img = noise(3, 3, n);
  const pa::Tensor flow = noise(4, 2, n, -0.5, 0.5);
  for (auto _ : state) {
    pa::grad::Graph g;
    const pa::grad::Var fv = g.leaf(flow);
    const pa::grad::Var w = pa::grad::bilinear_warp(g.constant(img), fv);
    benchmark::DoNotOptimize(g.backward(pa::grad::global_mean(w)).of(fv));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}

void BM_PgdAttack(benchmark::State& state) {
  const auto m = metric_for(static_cast<int>(state.range(0)));
  const std::size_t n = 64;
  pa::Triplet t;
  t.ref = noise(5, 3, n, -0.6, 0.6);
  t.p0 = t.ref;
  t.p1 = t.ref;
  const pa::Tensor d0 = noise(6, 3, n, -0.05, 0.05), d1 = noise(7, 3, n, -0.1, 0.1);
  for (std::size_t k = 0; k < t.ref.size(); ++k) {
    t.p0[k] += d0[k];
    t.p1[k] += d1[k];
  }
  pa::PgdConfig cfg;
  cfg.stop_at_flip = false;
  for (auto _ : state) benchmark::DoNotOptimize(pa::pgd_attack(t, *m, cfg).s_adv);
  state.SetLabel(kNames[state.range(0)]);
  state.counters["steps"] = static_cast<double>(cfg.max_iters);
}

}  // namespace

BENCHMARK(BM_MetricForward)->ArgsProduct({{0, 1, 2, 3}, {64}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MetricGradient)->ArgsProduct({{0, 1, 2, 3}, {64}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BilinearWarp)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PgdAttack)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

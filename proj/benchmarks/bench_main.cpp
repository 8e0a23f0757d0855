#include <benchmark/benchmark.h>

#include <cmath>

#include "hessmatch/aa_system.hpp"
#include "hessmatch/cg_model.hpp"
#include "hessmatch/ensemble.hpp"
#include "hessmatch/probes.hpp"
#include "hessmatch/targets.hpp"

namespace {

using namespace hm;

CGModelState bench_mlp(int n_beads) {
  FeatureConfig features;
  features.rbf_count = 12;
  features.cutoff_low = 0.3;
  features.cutoff_high = 2.5;
  RngState rng{1};
  return make_mlp(n_beads, 2, {16, 16}, features, rng);
}

Vec bench_positions(int n_beads, RngState& rng) {
  Vec r = standard_normals(rng, n_beads * 2);
  for (int b = 0; b < n_beads; ++b) r[b * 2] += 1.1 * b;
  for (double& x : r) x *= 0.9;
  return r;
}

void bm_model_forces(benchmark::State& state) {
  const int n_beads = static_cast<int>(state.range(0));
  const CGModelState m = bench_mlp(n_beads);
  RngState rng{2};
  const Vec r = bench_positions(n_beads, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model_forces(m, r));
}

void bm_model_hvp(benchmark::State& state) {
  const int n_beads = static_cast<int>(state.range(0));
  const CGModelState m = bench_mlp(n_beads);
  RngState rng{3};
  const Vec r = bench_positions(n_beads, rng);
  const Vec v = standard_normals(rng, r.size());
  for (auto _ : state) benchmark::DoNotOptimize(model_hvp(m, r, v));
}

void bm_generate_probes(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  int frame = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_probes(7, frame++, 8, d));
}

void bm_precompute_term1(benchmark::State& state) {
  Mat k(4, 4);
  for (int i = 0; i < 4; ++i) k(i, i) = 4.0;
  k(0, 1) = k(1, 0) = -1.0;
  k(2, 3) = k(3, 2) = -1.0;
  const ForceField ff{4, 1, {QuadraticForm{k}}};
  Mat xi(2, 4);
  xi(0, 0) = 0.5;
  xi(0, 1) = 0.5;
  xi(1, 2) = 0.5;
  xi(1, 3) = 0.5;
  const CGMap map = LinearCGMap{xi};
  RngState rng{4};
  std::vector<AtomisticFrame> frames;
  for (int t = 0; t < 32; ++t) frames.push_back({standard_normals(rng, 4), t});
  for (auto _ : state)
    benchmark::DoNotOptimize(precompute_term1(frames, ff, map, 11, 8, 1e-5));
}

void bm_cg_hessian_estimate(benchmark::State& state) {
  const ForceField ff{1, 2, {HarmonicBond{0, -1, 4.0, 1.0}}};
  const CGMap map = NonlinearCGMap{1, 2, RadialFromPinnedMap{0}};
  ConditionalEnsemble ens;
  ens.target_r = {1.0};
  ens.beta = 1.0;
  RngState rng{5};
  const int count = static_cast<int>(state.range(0));
  for (int t = 0; t < count; ++t) {
    const double th = 6.283185307179586 * uniform01(rng);
    ens.frames.push_back({{std::cos(th), std::sin(th)}, t});
  }
  for (auto _ : state) benchmark::DoNotOptimize(cg_hessian_estimate(ens, ff, map));
}

BENCHMARK(bm_model_forces)->Arg(4)->Arg(16)->Arg(64);
BENCHMARK(bm_model_hvp)->Arg(4)->Arg(16)->Arg(64);
BENCHMARK(bm_generate_probes)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(bm_precompute_term1);
BENCHMARK(bm_cg_hessian_estimate)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();

#include <random>

#include <benchmark/benchmark.h>

#include "mincontrol/gramian.h"
#include "mincontrol/min_energy.h"
#include "mincontrol/spectral.h"

namespace {

using mincontrol::LinearSystem;
using mincontrol::Matrix;

LinearSystem StableSystem(int n) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(n));
  std::normal_distribution<double> gauss;
  Matrix a(n, n);
  Matrix b(n, (n + 1) / 2);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = gauss(rng) / std::sqrt(n);
  for (int i = 0; i < b.size(); ++i) b.data()[i] = gauss(rng);
  a -= (mincontrol::StabilityMargin(a) + 1.0) * Matrix::Identity(n, n);
  return LinearSystem(a, b);
}

void BM_Expm(benchmark::State& state) {
  const LinearSystem sys = StableSystem(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mincontrol::Expm(sys.a(), 1.3));
}
BENCHMARK(BM_Expm)->Arg(4)->Arg(16)->Arg(64);

void BM_GramianQuadrature(benchmark::State& state) {
  const LinearSystem sys = StableSystem(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mincontrol::GramianQuadrature(sys, 2.0));
}
BENCHMARK(BM_GramianQuadrature)->Arg(4)->Arg(16);

void BM_GramianLyapunovOde(benchmark::State& state) {
  const LinearSystem sys = StableSystem(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mincontrol::GramianLyapunovOde(sys, 2.0));
}
BENCHMARK(BM_GramianLyapunovOde)->Arg(4)->Arg(16);

void BM_GramianInfinite(benchmark::State& state) {
  const LinearSystem sys = StableSystem(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mincontrol::GramianInfinite(sys));
}
BENCHMARK(BM_GramianInfinite)->Arg(4)->Arg(16)->Arg(32);

void BM_FamilyAlgebraic(benchmark::State& state) {
  const LinearSystem sys = StableSystem(16);
  const mincontrol::Gramian q_inf = mincontrol::GramianInfinite(sys);
  for (auto _ : state) benchmark::DoNotOptimize(mincontrol::GramianAlgebraic(sys, q_inf, 2.0));
}
BENCHMARK(BM_FamilyAlgebraic);

void BM_BruteForce(benchmark::State& state) {
  const LinearSystem sys = StableSystem(4);
  const mincontrol::Vector x = mincontrol::Vector::Ones(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mincontrol::BruteForceMinEnergy(sys, x, 1.0, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_BruteForce)->Arg(250)->Arg(1000)->Arg(4000);

void BM_SpectralGramian(benchmark::State& state) {
  const mincontrol::SpectralSystem sp = mincontrol::ParseSpectralPreset("spectral:landau-ginzburg")
                                            .Truncate(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mincontrol::SpectralGramian(sp, 0.5));
}
BENCHMARK(BM_SpectralGramian)->Arg(32)->Arg(256);

}  // namespace

BENCHMARK_MAIN();

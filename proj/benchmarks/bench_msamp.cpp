#include <benchmark/benchmark.h>

#include <random>

#include "msamp/amp.hpp"

using namespace msamp;

namespace {

MixtureSpec two_species(bool cubic) {
  MixtureSpec s;
  s.r = 2;
  s.lambda = {0.4, 0.6};
  s.h = {0.3, 0.2};
  s.gammas[2] = {0.5, 0.7, 0.7, 0.3};
  if (cubic) s.gammas[3] = {0.9, 0.8, 0.8, 0.7, 0.8, 0.7, 0.7, 1.0};
  return s;
}

Vec unit_point(int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Vec x(N);
  for (int i = 0; i < N; ++i) x[i] = n01(rng);
  return x * (std::sqrt(static_cast<double>(N)) / x.norm());
}

}  // namespace

static void BM_SampleCubic(benchmark::State& state) {
  const Mixture mix(two_species(true));
  const int N = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(HamiltonianInstance::sample(mix, N, seed++));
  state.SetComplexityN(N);
}
BENCHMARK(BM_SampleCubic)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oNCubed);

static void BM_GradientCubic(benchmark::State& state) {
  const Mixture mix(two_species(true));
  const int N = static_cast<int>(state.range(0));
  const auto H = HamiltonianInstance::sample(mix, N, 1);
  const Vec x = unit_point(N, 2);
  for (auto _ : state) benchmark::DoNotOptimize(H.gradient(x));
  state.SetComplexityN(N);
}
BENCHMARK(BM_GradientCubic)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oNCubed);

static void BM_GradientQuadratic(benchmark::State& state) {
  const Mixture mix(two_species(false));
  const int N = static_cast<int>(state.range(0));
  const auto H = HamiltonianInstance::sample(mix, N, 1);
  const Vec x = unit_point(N, 2);
  for (auto _ : state) benchmark::DoNotOptimize(H.gradient(x));
  state.SetComplexityN(N);
}
BENCHMARK(BM_GradientQuadratic)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMicrosecond)->Complexity(benchmark::oNSquared);

static void BM_SolvePhi(benchmark::State& state) {
  const Mixture mix(two_species(true));
  PhiSolverOptions opt;
  opt.grid_size = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_phi(mix, opt));
}
BENCHMARK(BM_SolvePhi)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_Stage1(benchmark::State& state) {
  MixtureSpec spec = two_species(false);
  spec.h = {1.5, 2.0};
  const Mixture mix(spec);
  const int N = static_cast<int>(state.range(0));
  const auto H = HamiltonianInstance::sample(mix, N, 1);
  for (auto _ : state) benchmark::DoNotOptimize(stage1_run(H, Vec::Ones(2), SignPattern::ones(2), 25));
}
BENCHMARK(BM_Stage1)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

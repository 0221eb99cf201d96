#include <benchmark/benchmark.h>

#include "boltzcurve/metrics.hpp"

using namespace bc;

namespace {

void BM_EnergyDistance(benchmark::State& state) {
  const long n = state.range(0);
  Rng rng(9);
  Eigen::MatrixXd x(n, 2), y(n, 2);
  for (long i = 0; i < 2 * n; ++i) {
    x.data()[i] = rng.normal();
    y.data()[i] = rng.normal() + 0.1;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(energy_distance(x, y, 0));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_EnergyDistance)->Range(512, 8192)->Complexity()->Unit(benchmark::kMillisecond);

void BM_Ess(benchmark::State& state) {
  Rng rng(10);
  Eigen::VectorXd w(50000);
  for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform(-5, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ess(w));
  }
}
BENCHMARK(BM_Ess);

}  // namespace

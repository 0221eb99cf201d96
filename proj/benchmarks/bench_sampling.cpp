#include <benchmark/benchmark.h>

#include "boltzcurve/odeint.hpp"

using namespace bc;

namespace {

void BM_SampleWithLogdet(benchmark::State& state) {
  ModelConfig mc;
  mc.kind = InterpKind::gradflow;
  FlowModel m = make_flow_model(gmm40(0), gaussian_latent(1.0, 2), mc, 7);
  Rng rng(3);
  SolverConfig cfg;
  Eigen::VectorXd z(2);
  for (auto _ : state) {
    z << rng.normal(), rng.normal();
    benchmark::DoNotOptimize(sample_backward(m, z, cfg));
  }
}
BENCHMARK(BM_SampleWithLogdet)->Unit(benchmark::kMillisecond);

void BM_EulerTransportBatch(benchmark::State& state) {
  ModelConfig mc;
  mc.kind = InterpKind::gradflow;
  FlowModel m = make_flow_model(manywell8(), gaussian_latent(1.0, 8), mc, 7);
  SolverConfig cfg;
  cfg.method = SolverConfig::Method::euler;
  cfg.euler_steps = 200;
  cfg.nan_policy = SolverConfig::NanPolicy::resample;
  Rng rng(4);
  Eigen::MatrixXd zs(state.range(0), 8);
  for (long i = 0; i < zs.size(); ++i) zs.data()[i] = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(euler_with_nan_resample(m, zs, cfg, rng, 0));
  }
}
BENCHMARK(BM_EulerTransportBatch)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

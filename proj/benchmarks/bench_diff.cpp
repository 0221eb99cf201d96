#include <benchmark/benchmark.h>

#include "boltzcurve/backprop.hpp"
#include "boltzcurve/diffops.hpp"

using namespace bc;

namespace {

Mlp default_psi(int d) {
  Mlp net({1 + d, 128, 128, 128, 1});
  Rng rng(1);
  net.init_params(rng);
  return net;
}

void BM_MlpForward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Mlp net = default_psi(d);
  Rng rng(2);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform(-2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward(net, 0.4, x));
  }
}
BENCHMARK(BM_MlpForward)->Arg(2)->Arg(8);

void BM_LaplacianDualSweeps(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Mlp net = default_psi(d);
  Rng rng(2);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform(-2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(laplacian(net, 0.4, x));
  }
}
BENCHMARK(BM_LaplacianDualSweeps)->Arg(2)->Arg(8);

void BM_FullSweepForward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Mlp net = default_psi(d);
  Rng rng(2);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform(-2, 2);
  MlpSweep sweep;
  for (auto _ : state) {
    sweep.forward(net, 0.4, x, SweepConfig{d, true, true});
    benchmark::DoNotOptimize(sweep.lap());
  }
}
BENCHMARK(BM_FullSweepForward)->Arg(2)->Arg(8);

void BM_FullSweepBackward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Mlp net = default_psi(d);
  Rng rng(2);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform(-2, 2);
  MlpSweep sweep;
  sweep.forward(net, 0.4, x, SweepConfig{d, true, true});
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
  const Eigen::VectorXd abar = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::MatrixXd ubar = Eigen::MatrixXd::Constant(1, d + 1, 0.5);
  const Eigen::MatrixXd vbar = Eigen::MatrixXd::Constant(1, d, 0.25);
  for (auto _ : state) {
    sweep.backward(net, abar, ubar, vbar,
                   {grad.data(), static_cast<std::size_t>(grad.size())});
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_FullSweepBackward)->Arg(2)->Arg(8);

}  // namespace

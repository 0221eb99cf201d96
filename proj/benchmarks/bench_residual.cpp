#include <benchmark/benchmark.h>

#include "boltzcurve/training.hpp"

using namespace bc;

namespace {

FlowModel paper_scale_model(InterpKind kind, int d) {
  ModelConfig mc;
  mc.kind = kind;
  const double sigma = kind == InterpKind::gradflow ? 1.0 : 2.0;
  TargetPtr target = d == 2 ? TargetPtr(gmm40(0)) : TargetPtr(manywell8());
  return make_flow_model(target, gaussian_latent(sigma, d), mc, 7);
}

void BM_ResidualForward(benchmark::State& state) {
  const auto kind = static_cast<InterpKind>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  FlowModel m = paper_scale_model(kind, d);
  ModelEval eval(m);
  Rng rng(3);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform(-2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval.residual(0.37, x));
  }
}
BENCHMARK(BM_ResidualForward)
    ->Args({0, 2})
    ->Args({1, 2})
    ->Args({2, 2})
    ->Args({2, 8});

void BM_ResidualWithGradient(benchmark::State& state) {
  const auto kind = static_cast<InterpKind>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  FlowModel m = paper_scale_model(kind, d);
  ModelEval eval(m);
  Rng rng(3);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform(-2, 2);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.flat_param_count());
  for (auto _ : state) {
    const double r = eval.residual(0.37, x);
    eval.residual_backward(2.0 * r, {grad.data(), static_cast<std::size_t>(grad.size())});
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_ResidualWithGradient)
    ->Args({0, 2})
    ->Args({1, 2})
    ->Args({2, 2})
    ->Args({2, 8});

void BM_LossGradBatch(benchmark::State& state) {
  // one gradflow optimizer step worth of work at the default batch
  FlowModel m = paper_scale_model(InterpKind::gradflow, 2);
  Rng rng(5);
  Collocation pts = collocation_uniform_ou(m.target->domain_box(), 4096, m.vp,
                                           1e-4, rng);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(residual_loss(m, pts, threads));
  }
}
BENCHMARK(BM_LossGradBatch)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

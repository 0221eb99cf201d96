#include "boltzcurve/training.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "boltzcurve/parallel.hpp"

namespace bc {

Collocation collocation_trajectory(const FlowModel& model_prev, int batch,
                                   int time_steps, const SolverConfig& solver,
                                   Rng& rng, int threads) {
  if (batch <= 0 || time_steps < 2) {
    throw std::invalid_argument("collocation_trajectory: bad batch/time_steps");
  }
  const int d = model_prev.dim();
  const bool data_at_zero = model_prev.kind == InterpKind::gradflow;

  Eigen::MatrixXd zs(batch, d);
  for (int i = 0; i < batch; ++i) {
    zs.row(i) = model_prev.latent->sample(rng).transpose();
  }

  std::vector<double> grid(static_cast<std::size_t>(time_steps));
  for (int k = 0; k < time_steps; ++k) {
    grid[static_cast<std::size_t>(k)] =
        static_cast<double>(k) / static_cast<double>(time_steps - 1);
  }

  Collocation out;
  out.t.resize(static_cast<std::size_t>(batch) * time_steps);
  out.x.resize(static_cast<long>(batch) * time_steps, d);

  parallel_chunks(batch, 8, threads, [&](long, long begin, long end) {
    FlowFieldEval field = make_flow_field(model_prev);
    Eigen::VectorXd v(d);
    for (long i = begin; i < end; ++i) {
      // walk the grid from the latent end; each segment continues the last
      Eigen::VectorXd x = zs.row(i).transpose();
      for (int k = 0; k < time_steps; ++k) {
        const int slot = data_at_zero ? time_steps - 1 - k : k;
        const double t_here = grid[static_cast<std::size_t>(slot)];
        if (k > 0) {
          const int prev = data_at_zero ? slot + 1 : slot - 1;
          const double t_prev = grid[static_cast<std::size_t>(prev)];
          x = integrate(
              [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
                field(t, y, v, nullptr);
                dy = v;
              },
              x, t_prev, t_here, solver);
        }
        const long row = i * time_steps + slot;
        out.t[static_cast<std::size_t>(row)] = t_here;
        out.x.row(row) = x.transpose();
      }
    }
  });
  return out;
}

Collocation collocation_uniform_ou(const Box& domain, int n,
                                   const VpSchedule& vp, double time_eps,
                                   Rng& rng) {
  const auto d = domain.lo.size();
  Collocation out;
  out.t.resize(static_cast<std::size_t>(n));
  out.x.resize(n, d);
  Eigen::VectorXd u(d), z(d);
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(time_eps, 1.0 - time_eps);
    for (Eigen::Index j = 0; j < d; ++j) u[j] = rng.uniform(domain.lo[j], domain.hi[j]);
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    out.t[static_cast<std::size_t>(i)] = t;
    out.x.row(i) = ou_interpolant(vp, t, z, u).transpose();
  }
  return out;
}

namespace {
constexpr long kGradBlock = 128;  // points per deterministic reduction block
}

LossGrad residual_loss(const FlowModel& m, const Collocation& points,
                       int threads) {
  const long n = points.x.rows();
  if (n == 0) throw std::invalid_argument("residual_loss: empty batch");
  const std::ptrdiff_t n_params = m.flat_param_count();
  const long n_blocks = (n + kGradBlock - 1) / kGradBlock;

  Eigen::MatrixXd block_grads = Eigen::MatrixXd::Zero(n_params, n_blocks);
  Eigen::VectorXd block_loss = Eigen::VectorXd::Zero(n_blocks);

  parallel_chunks(n, kGradBlock, threads, [&](long block, long begin, long end) {
    ModelEval eval(m);
    double* g = block_grads.col(block).data();
    double loss = 0.0;
    for (long i = begin; i < end; ++i) {
      const Eigen::VectorXd x = points.x.row(i).transpose();
      const double t = points.t[static_cast<std::size_t>(i)];
      const double r = eval.residual(t, x);
      eval.residual_backward(2.0 * r / static_cast<double>(n),
                             {g, static_cast<std::size_t>(n_params)});
      loss += r * r;
    }
    block_loss[block] = loss;
  });

  LossGrad out;
  out.grad = Eigen::VectorXd::Zero(n_params);
  double loss = 0.0;
  for (long b = 0; b < n_blocks; ++b) {
    out.grad += block_grads.col(b);
    loss += block_loss[b];
  }
  out.loss = loss / static_cast<double>(n);
  return out;
}

double residual_loss_value(const FlowModel& m, const Collocation& points,
                           int threads) {
  const long n = points.x.rows();
  if (n == 0) throw std::invalid_argument("residual_loss_value: empty batch");
  const long n_blocks = (n + kGradBlock - 1) / kGradBlock;
  Eigen::VectorXd block_loss = Eigen::VectorXd::Zero(n_blocks);
  parallel_chunks(n, kGradBlock, threads, [&](long block, long begin, long end) {
    ModelEval eval(m);
    double loss = 0.0;
    for (long i = begin; i < end; ++i) {
      const double r = eval.residual(points.t[static_cast<std::size_t>(i)],
                                     points.x.row(i).transpose());
      loss += r * r;
    }
    block_loss[block] = loss;
  });
  return block_loss.sum() / static_cast<double>(n);
}

namespace {

struct Adam {
  Eigen::VectorXd m1, m2;
  long step = 0;

  explicit Adam(std::ptrdiff_t n)
      : m1(Eigen::VectorXd::Zero(n)), m2(Eigen::VectorXd::Zero(n)) {}

  void update(FlowModel& model, const Eigen::VectorXd& grad,
              const TrainConfig& tc, double lr) {
    ++step;
    m1 = tc.adam_beta1 * m1 + (1.0 - tc.adam_beta1) * grad;
    m2 = tc.adam_beta2 * m2 + (1.0 - tc.adam_beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(step));
    std::ptrdiff_t off = 0;
    for (Mlp* net : model.nets()) {
      const auto k = net->param_count();
      net->params.array() -=
          lr * (m1.segment(off, k).array() / c1) /
          ((m2.segment(off, k).array() / c2).sqrt() + tc.adam_eps);
      off += k;
    }
  }
};

double cosine_lr(const TrainConfig& tc, long iter) {
  const double span = static_cast<double>(std::max<long>(1, tc.iterations - 1));
  const double c = 0.5 * (1.0 + std::cos(3.14159265358979323846 *
                                         static_cast<double>(iter) / span));
  return tc.lr_final + (tc.learning_rate - tc.lr_final) * c;
}

}  // namespace

TrainResult train(TargetPtr target, TargetPtr latent, const ModelConfig& mc,
                  const TrainConfig& tc, const SolverConfig& solver,
                  const std::function<void(long, double)>& progress) {
  if (tc.iterations <= 0) throw std::invalid_argument("train: iterations <= 0");

  Rng seeder(tc.seed);
  const std::uint64_t init_seed = seeder.next_u64();
  Rng data_rng(seeder.next_u64());

  TrainResult result;
  result.model = make_flow_model(std::move(target), std::move(latent), mc,
                                 init_seed);
  FlowModel& model = result.model;
  result.loss_trace.reserve(static_cast<std::size_t>(tc.iterations));

  Adam adam(model.flat_param_count());
  Collocation points;
  int bad_streak = 0;

  for (long iter = 0; iter < tc.iterations; ++iter) {
    if (model.kind == InterpKind::gradflow) {
      points = collocation_uniform_ou(model.target->domain_box(), tc.particles,
                                      model.vp, kTimeEps, data_rng);
    } else if (iter % std::max(1, tc.refresh_interval) == 0) {
      points = collocation_trajectory(model, tc.batch_size, tc.time_steps,
                                      solver, data_rng, tc.threads);
    }

    LossGrad lg = residual_loss(model, points, tc.threads);
    result.loss_trace.push_back(lg.loss);
    if (progress) progress(iter, lg.loss);

    if (!std::isfinite(lg.loss)) {
      if (++bad_streak >= 3) {
        throw TrainingError(
            "train: non-finite loss for 3 consecutive iterations (iteration " +
            std::to_string(iter) + ")");
      }
      continue;  // skip the update, keep parameters intact
    }
    bad_streak = 0;
    adam.update(model, lg.grad, tc, cosine_lr(tc, iter));
  }
  return result;
}

}  // namespace bc

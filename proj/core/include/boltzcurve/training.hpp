#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "boltzcurve/interpolation.hpp"
#include "boltzcurve/odeint.hpp"

namespace bc {

struct TrainConfig {
  long iterations = 0;
  int batch_size = 256;     // trajectory collocation particles
  int time_steps = 50;      // states recorded per trajectory
  int particles = 4096;     // uniform-OU collocation points per iteration
  double learning_rate = 1e-3;
  double lr_final = 1e-5;   // cosine decay endpoint
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int refresh_interval = 1;  // iterations between trajectory re-simulations
  int threads = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collocation points; row i of x pairs with t[i].
struct Collocation {
  std::vector<double> t;
  Eigen::MatrixXd x;
};

/// Simulates batch trajectories of the frozen model and records states at
/// time_steps equispaced times spanning [0, 1] (walking from the latent end).
/// Gradients never flow through the generating model; the returned points are
/// plain numbers.
Collocation collocation_trajectory(const FlowModel& model_prev, int batch,
                                   int time_steps, const SolverConfig& solver,
                                   Rng& rng, int threads);

/// Per point: t ~ U[eps, 1-eps], u ~ U(domain), z ~ N(0, I), and the
/// closed-form noising map applied to (z, u).
Collocation collocation_uniform_ou(const Box& domain, int n,
                                   const VpSchedule& vp, double time_eps,
                                   Rng& rng);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // flat, FlowModel::nets() order
};

/// Mean squared residual over the collocation batch and its exact parameter
/// gradient. Accumulation runs over fixed-size point blocks reduced in block
/// order, so the result does not depend on the thread count.
LossGrad residual_loss(const FlowModel& m, const Collocation& points,
                       int threads);
double residual_loss_value(const FlowModel& m, const Collocation& points,
                           int threads);

struct TrainResult {
  FlowModel model;
  std::vector<double> loss_trace;
};

/// Adam on the mean squared residual: trajectory collocation for the linear
/// and learned kinds (one update per iteration across all time slices),
/// uniform-OU collocation for gradflow. Aborts after three consecutive
/// non-finite losses. Deterministic given (seed, cfg); the optional progress
/// callback observes (iteration, loss) and does not influence the run.
TrainResult train(TargetPtr target, TargetPtr latent, const ModelConfig& mc,
                  const TrainConfig& tc, const SolverConfig& solver,
                  const std::function<void(long, double)>& progress = {});

// ---------------------------------------------------------------------------
// Checkpoints: "BCRV" | u32 version | u64 metadata length | UTF-8 JSON
// metadata | float64 parameter payload in net order | CRC32 of the payload,
// all little-endian.
// ---------------------------------------------------------------------------

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const FlowModel& m, const std::filesystem::path& path,
                     std::uint64_t seed, long iterations);

struct LoadedCheckpoint {
  FlowModel model;
  std::uint64_t seed = 0;
  long iterations = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bc

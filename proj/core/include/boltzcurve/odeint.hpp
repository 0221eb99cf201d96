#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>

#include "boltzcurve/interpolation.hpp"
#include "boltzcurve/rng.hpp"

namespace bc {

struct SolverConfig {
  enum class Method { dopri5, euler };
  enum class NanPolicy { error, resample };

  Method method = Method::dopri5;
  double rtol = 1e-5;
  double atol = 1e-5;
  long max_steps = 100000;
  int euler_steps = 200;
  NanPolicy nan_policy = NanPolicy::error;
};

class IntegrationError : public std::runtime_error {
 public:
  enum class Kind { max_steps, non_finite, step_underflow };

  IntegrationError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Particle position with the accumulated divergence integral along its
/// trajectory; logdet starts at 0 and the pushforward log density satisfies
/// log rho_t1(x(t1)) = log rho_t0(x0) - logdet.
struct AugmentedState {
  Eigen::VectorXd x;
  double logdet = 0.0;
};

using OdeRhs = std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Velocity field with exact divergence: fills v, and *div when non-null.
using FlowFieldEval =
    std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&, double*)>;

/// Integrates dx/dt = f(t, x) from t0 to t1 (backward allowed, t1 < t0).
/// dopri5 uses the embedded 4(5) error estimate with a PI step controller
/// (safety 0.9, factor clamp [0.2, 10], Hairer-Norsett-Wanner initial step).
Eigen::VectorXd integrate(const OdeRhs& f, const Eigen::VectorXd& x0, double t0,
                          double t1, const SolverConfig& cfg);

/// Jointly integrates dx/dt = v and d(logdet)/dt = div v(t, x(t)).
AugmentedState integrate_with_logdet(const FlowFieldEval& field,
                                     const Eigen::VectorXd& x0, double t0,
                                     double t1, const SolverConfig& cfg);

/// Velocity field of a model, with exact divergence. Each returned object
/// owns its own workspaces: create one per thread.
FlowFieldEval make_flow_field(const FlowModel& m);

struct SampleResult {
  Eigen::VectorXd x;
  double logq = 0.0;
};

/// Pushes one latent draw through the model's flow: forward in time for the
/// linear/learned kinds (data lives at t = 1), from t = 1 down to t = 0 for
/// gradflow (data lives at t = 0). logq = log rho_Z(z) - logdet.
SampleResult sample_backward(const FlowModel& m, const Eigen::VectorXd& z,
                             const SolverConfig& cfg);

struct BatchSampleResult {
  Eigen::MatrixXd x;       // one sample per row
  Eigen::VectorXd logq;
  long resampled = 0;      // latent redraws caused by non-finite trajectories
  double resample_rate = 0.0;
};

/// Low-level batch transport over an arbitrary field. field_factory is called
/// once per worker thread; latent_log_density supplies log rho at the start
/// points; `redraw` produces replacement start points (called on the caller
/// thread, in particle order). With NanPolicy::resample, failed particles are
/// redrawn and counted; a redraw rate above 10% aborts with a diagnostic.
BatchSampleResult transport_batch(
    const std::function<FlowFieldEval()>& field_factory, double t0, double t1,
    const std::function<double(const Eigen::VectorXd&)>& latent_log_density,
    Eigen::MatrixXd z_batch, const SolverConfig& cfg,
    const std::function<Eigen::VectorXd()>& redraw, int threads);

/// Samples n particles; latent draws (and any resampling redraws) come from
/// `rng` in particle order on the calling thread, so results do not depend on
/// the thread count. With NanPolicy::resample failed particles are redrawn;
/// a redraw rate above 10% aborts.
BatchSampleResult sample_batch(const FlowModel& m, long n,
                               const SolverConfig& cfg, Rng& rng, int threads);

/// Fixed-step Euler transport of a given latent batch with NaN resampling
/// (requires NanPolicy::resample); reports the fraction of redrawn particles.
BatchSampleResult euler_with_nan_resample(const FlowModel& m,
                                          const Eigen::MatrixXd& z_batch,
                                          const SolverConfig& cfg, Rng& rng,
                                          int threads);

}  // namespace bc

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boltzcurve/backprop.hpp"
#include "boltzcurve/mlp.hpp"
#include "boltzcurve/targets.hpp"

namespace bc {

enum class InterpKind { linear, learned, gradflow };

const char* to_string(InterpKind kind);
InterpKind interp_kind_from_string(const std::string& s);

/// Variance-preserving rate schedule beta(t) = beta_min + t (beta_max -
/// beta_min) with exact integral g_vp(t) = beta_min t + (beta_max-beta_min)
/// t^2 / 2.
struct VpSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;

  double beta(double t) const;
  double g_vp(double t) const;
};

/// Closed-form noising map X_t = sqrt(1 - e^{-g}) z + e^{-g/2} x0.
Eigen::VectorXd ou_interpolant(const VpSchedule& vp, double t,
                               const Eigen::VectorXd& z,
                               const Eigen::VectorXd& x0);

/// Learned time schedule g(t) = (1-t) + t(1-t) h(t) with a small net h; the
/// boundary values g(0) = 1, g(1) = 0 hold for every parameter vector.
struct Scheduler {
  Mlp h;

  double value(double t) const;
  double deriv(double t) const;
};

/// One interpolation scheme between the latent energy f_Z and the target
/// energy f_D, with whatever networks the scheme learns:
///   linear    f_t = (1-t) f_Z + t f_D                  nets: v, C
///   learned   f_t = (1-t) f_Z + t f_D + t(1-t) psi_t   nets: psi, v, C
///   gradflow  f_t = g(t) f_D + t psi_t                 nets: psi, C, g
/// For gradflow the latent must be the standard Gaussian; its velocity is
/// fixed to (beta/2) grad(f_t - |x|^2/2).
struct FlowModel {
  InterpKind kind = InterpKind::linear;
  TargetPtr target;  // f_D (f_1 for linear/learned)
  TargetPtr latent;  // f_Z (f_0 for linear/learned), Gaussian
  Mlp psi;
  Mlp vel;
  Mlp cnet;
  Scheduler sched;
  bool use_ct = true;
  VpSchedule vp;

  int dim() const { return target->dim(); }
  /// Nets in flat-parameter order: psi, vel, cnet, sched.h (present ones only).
  std::vector<const Mlp*> nets() const;
  std::vector<Mlp*> nets();
  std::ptrdiff_t flat_param_count() const;
};

struct ModelConfig {
  InterpKind kind = InterpKind::gradflow;
  std::vector<int> psi_hidden{128, 128, 128};
  std::vector<int> v_hidden{128, 128, 128};
  std::vector<int> c_hidden{64, 64};
  std::vector<int> g_hidden{32, 32};
  double beta_min = 0.1;
  double beta_max = 20.0;
  bool use_ct = true;
};

FlowModel make_flow_model(TargetPtr target, TargetPtr latent,
                          const ModelConfig& cfg, std::uint64_t init_seed);

/// Interpolated energy f_t(x).
double interp_energy(const FlowModel& m, double t, const Eigen::VectorXd& x);

/// Generic continuity-equation residual from assembled parts:
/// r = dt_ft - C + <grad_ft, v> - div_v.
double continuity_residual_parts(double dt_ft, double c,
                                 const Eigen::VectorXd& grad_ft,
                                 const Eigen::VectorXd& v, double div_v);

/// Gradient-flow residual with the VP-rescaled velocity
/// v = (beta/2)(grad_ft - x) folded in:
/// r = dt_ft - C + (beta/2)(<grad_ft, grad_ft - x> - lap_ft + d).
double gradflow_residual_parts(double dt_ft, double c,
                               const Eigen::VectorXd& grad_ft, double lap_ft,
                               const Eigen::VectorXd& x, double beta);

/// Pointwise residuals of the three schemes. Each checks the model kind and
/// throws on non-finite endpoint energies at x.
double linear_residual(const FlowModel& m, double t, const Eigen::VectorXd& x);
double learned_residual(const FlowModel& m, double t, const Eigen::VectorXd& x);
double gradflow_residual(const FlowModel& m, double t, const Eigen::VectorXd& x);
double residual(const FlowModel& m, double t, const Eigen::VectorXd& x);

struct VelDiv {
  Eigen::VectorXd v;
  double div;
};

Eigen::VectorXd velocity(const FlowModel& m, double t, const Eigen::VectorXd& x);
VelDiv velocity_and_divergence(const FlowModel& m, double t,
                               const Eigen::VectorXd& x);

/// Workspace-carrying evaluator used in hot loops (training, sampling).
/// residual() caches the forward state; residual_backward(r_bar, grad) then
/// accumulates r_bar * dr/dtheta into a flat gradient laid out per
/// FlowModel::nets().
class ModelEval {
 public:
  explicit ModelEval(const FlowModel& m) : m_(&m) {}

  double residual(double t, const Eigen::VectorXd& x);
  void residual_backward(double r_bar, std::span<double> grad);
  double residual_grad(double t, const Eigen::VectorXd& x, double r_bar,
                       std::span<double> grad) {
    const double r = residual(t, x);
    residual_backward(r_bar, grad);
    return r;
  }
  Eigen::VectorXd velocity(double t, const Eigen::VectorXd& x);
  VelDiv velocity_and_divergence(double t, const Eigen::VectorXd& x);

 private:
  const FlowModel* m_;
  MlpSweep psi_, vel_, c_, g_;
  // forward state consumed by residual_backward
  double tc_ = 0.0, beta_ = 0.0, fd_ = 0.0, ld_ = 0.0;
  Eigen::VectorXd x_, big_g_, v_, gd_;
};

/// Residual evaluation clamps t into [kTimeEps, 1 - kTimeEps].
inline constexpr double kTimeEps = 1e-4;

}  // namespace bc

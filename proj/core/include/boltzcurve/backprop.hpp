#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "boltzcurve/mlp.hpp"

namespace bc {

/// Seed layout for a derivative sweep. Spatial tangents occupy columns
/// 0..space_dims-1, the time tangent (when present) the last column. The
/// second-order stream carries the spatial directions only.
struct SweepConfig {
  int space_dims = 0;
  bool time = false;
  bool second = false;

  int n_seeds() const { return space_dims + (time ? 1 : 0); }
  int n_second() const { return second ? space_dims : 0; }
};

/// Layer-wise forward sweep through an Mlp carrying first (and optionally
/// second) order tangent streams, plus the matching reverse sweep for
/// parameter gradients. This is the vectorized twin of the scalar dual-number
/// path in diffops; the two agree to roundoff and are cross-checked in tests.
///
/// Forward recurrences per hidden layer (s = sigmoid(z), phi = z*s):
///   z = W a- + b,  Uz = W U-,  Vz = W V-
///   a = phi(z),    U = phi'(z) o Uz,  V = phi''(z) o Uz^2 + phi'(z) o Vz
/// The backward pass propagates adjoints of (a, U, V) through these relations
/// and accumulates weight/bias gradients in the Mlp parameter layout.
class MlpSweep {
 public:
  void forward(const Mlp& net, double t, const Eigen::VectorXd& x,
               const SweepConfig& cfg);

  const Eigen::VectorXd& value() const { return a_.back(); }
  double value0() const { return a_.back()[0]; }

  /// d(output row `out`)/dt; requires cfg.time.
  double dvalue_dt(int out = 0) const {
    return u_.back()(out, cfg_.space_dims);
  }
  /// Spatial gradient of output row `out`.
  Eigen::VectorXd grad(int out = 0) const {
    return u_.back().row(out).head(cfg_.space_dims).transpose();
  }
  /// Laplacian of output row `out`; requires cfg.second.
  double lap(int out = 0) const {
    return v_.back().row(out).head(cfg_.space_dims).sum();
  }
  /// Trace of the spatial Jacobian of a vector-output net.
  double div() const {
    double s = 0.0;
    for (int j = 0; j < cfg_.space_dims; ++j) s += u_.back()(j, j);
    return s;
  }

  /// Reverse sweep. abar/ubar/vbar are adjoints of value()/U/V at the output
  /// layer (pass empty matrices for unused streams); gradients accumulate into
  /// `grad`, which must have net.param_count() entries.
  void backward(const Mlp& net, const Eigen::VectorXd& abar,
                const Eigen::MatrixXd& ubar, const Eigen::MatrixXd& vbar,
                std::span<double> grad);

 private:
  SweepConfig cfg_;
  int layers_ = 0;
  // index 0 holds the input; index l the activations of layer l.
  std::vector<Eigen::VectorXd> a_;
  std::vector<Eigen::MatrixXd> u_, v_;
  // pre-activation state and swish derivative values per layer
  // (1-based slots, entry 0 unused); kept for the reverse sweep.
  std::vector<Eigen::VectorXd> z_, phi1_, phi2_, phi3_;
  std::vector<Eigen::MatrixXd> uz_, vz_;
  // scratch
  Eigen::VectorXd s_, sp_, spp_;
  Eigen::VectorXd zbar_, abar_cur_;
  Eigen::MatrixXd uzbar_, vzbar_, ubar_cur_, vbar_cur_;
};

}  // namespace bc

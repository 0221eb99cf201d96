#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "boltzcurve/dual.hpp"
#include "boltzcurve/mlp.hpp"
#include "boltzcurve/tape.hpp"

namespace bc {

/// Exact spatial gradient of a scalar-output net: d first-order dual sweeps.
Eigen::VectorXd spatial_grad(const Mlp& net, double t, const Eigen::VectorXd& x);

/// Exact time partial of a scalar-output net: one dual sweep seeded on t.
double time_partial(const Mlp& net, double t, const Eigen::VectorXd& x);

/// Exact divergence of a vector-output net (output dim == spatial dim):
/// trace of the spatial Jacobian from d directional sweeps, never stochastic.
double divergence(const Mlp& net, double t, const Eigen::VectorXd& x);

/// Full spatial Jacobian of a vector-output net (rows: outputs).
Eigen::MatrixXd spatial_jacobian(const Mlp& net, double t,
                                 const Eigen::VectorXd& x);

/// Exact Laplacian of a scalar-output net: d second-order dual sweeps.
double laplacian(const Mlp& net, double t, const Eigen::VectorXd& x);

/// Exact reverse-sweep gradient of a scalar loss with respect to a parameter
/// vector. The loss body runs on tape variables, so dual-number sweeps inside
/// it (spatial gradients, divergences, Laplacians) are differentiated through.
/// Throws on a non-finite loss value.
Eigen::VectorXd param_grad(
    const std::function<ad::Var(std::span<const ad::Var>)>& loss,
    const Eigen::VectorXd& params);

// ---------------------------------------------------------------------------
// Functor-based variants. F must be callable with any scalar type produced by
// lifting (t, x) into duals: f(T t, const std::vector<T>& x) -> T for scalar
// functions, -> std::vector<T> for vector fields.
// ---------------------------------------------------------------------------

template <class F>
Eigen::VectorXd spatial_grad_fn(F&& f, double t, const Eigen::VectorXd& x) {
  using D = Dual<double>;
  Eigen::VectorXd g(x.size());
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xd[static_cast<std::size_t>(i)] = D(x[i], i == j ? 1.0 : 0.0);
    }
    g[j] = f(D(t), xd).d;
  }
  return g;
}

template <class F>
double time_partial_fn(F&& f, double t, const Eigen::VectorXd& x) {
  using D = Dual<double>;
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) xd[static_cast<std::size_t>(i)] = D(x[i]);
  return f(D(t, 1.0), xd).d;
}

template <class F>
double laplacian_fn(F&& f, double t, const Eigen::VectorXd& x) {
  using D = Dual2<double>;
  double lap = 0.0;
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xd[static_cast<std::size_t>(i)] = D(x[i], i == j ? 1.0 : 0.0, 0.0);
    }
    lap += f(D(t), xd).d2;
  }
  return lap;
}

template <class F>
double divergence_fn(F&& f, double t, const Eigen::VectorXd& x) {
  using D = Dual<double>;
  double div = 0.0;
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xd[static_cast<std::size_t>(i)] = D(x[i], i == j ? 1.0 : 0.0);
    }
    div += f(D(t), xd)[static_cast<std::size_t>(j)].d;
  }
  return div;
}

}  // namespace bc

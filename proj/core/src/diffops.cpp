#include "boltzcurve/diffops.hpp"

#include <cmath>
#include <stdexcept>

namespace bc {

namespace {

void check_scalar_output(const Mlp& net, const char* op) {
  if (net.output_width() != 1) {
    throw std::invalid_argument(std::string(op) + ": scalar-output net required");
  }
}

void check_input(const Mlp& net, const Eigen::VectorXd& x, const char* op) {
  if (x.size() + 1 != net.input_width()) {
    throw std::invalid_argument(std::string(op) + ": input dimension mismatch");
  }
}

template <class D>
std::vector<D> sweep(const Mlp& net, D t, const std::vector<D>& x) {
  std::vector<D> input;
  input.reserve(x.size() + 1);
  input.push_back(t);
  input.insert(input.end(), x.begin(), x.end());
  return mlp_forward_generic<D, double>(
      net, {net.params.data(), static_cast<std::size_t>(net.params.size())},
      input);
}

}  // namespace

Eigen::VectorXd spatial_grad(const Mlp& net, double t, const Eigen::VectorXd& x) {
  check_scalar_output(net, "spatial_grad");
  check_input(net, x, "spatial_grad");
  using D = Dual<double>;
  Eigen::VectorXd g(x.size());
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xd[static_cast<std::size_t>(i)] = D(x[i], i == j ? 1.0 : 0.0);
    }
    g[j] = sweep<D>(net, D(t), xd)[0].d;
  }
  return g;
}

double time_partial(const Mlp& net, double t, const Eigen::VectorXd& x) {
  check_scalar_output(net, "time_partial");
  check_input(net, x, "time_partial");
  using D = Dual<double>;
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xd[static_cast<std::size_t>(i)] = D(x[i]);
  }
  return sweep<D>(net, D(t, 1.0), xd)[0].d;
}

Eigen::MatrixXd spatial_jacobian(const Mlp& net, double t,
                                 const Eigen::VectorXd& x) {
  check_input(net, x, "spatial_jacobian");
  using D = Dual<double>;
  Eigen::MatrixXd jac(net.output_width(), x.size());
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xd[static_cast<std::size_t>(i)] = D(x[i], i == j ? 1.0 : 0.0);
    }
    auto out = sweep<D>(net, D(t), xd);
    for (int i = 0; i < net.output_width(); ++i) {
      jac(i, j) = out[static_cast<std::size_t>(i)].d;
    }
  }
  return jac;
}

double divergence(const Mlp& net, double t, const Eigen::VectorXd& x) {
  check_input(net, x, "divergence");
  if (net.output_width() != x.size()) {
    throw std::invalid_argument("divergence: output dim must equal spatial dim");
  }
  using D = Dual<double>;
  double div = 0.0;
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xd[static_cast<std::size_t>(i)] = D(x[i], i == j ? 1.0 : 0.0);
    }
    div += sweep<D>(net, D(t), xd)[static_cast<std::size_t>(j)].d;
  }
  return div;
}

double laplacian(const Mlp& net, double t, const Eigen::VectorXd& x) {
  check_scalar_output(net, "laplacian");
  check_input(net, x, "laplacian");
  using D = Dual2<double>;
  double lap = 0.0;
  std::vector<D> xd(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      xd[static_cast<std::size_t>(i)] = D(x[i], i == j ? 1.0 : 0.0, 0.0);
    }
    lap += sweep<D>(net, D(t), xd)[0].d2;
  }
  return lap;
}

Eigen::VectorXd param_grad(
    const std::function<ad::Var(std::span<const ad::Var>)>& loss,
    const Eigen::VectorXd& params) {
  ad::TapeScope scope;
  std::vector<ad::Var> p(static_cast<std::size_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    p[static_cast<std::size_t>(i)] = ad::lift(params[i]);
  }
  ad::Var value = loss(p);
  if (!std::isfinite(value.v)) {
    throw std::runtime_error("param_grad: non-finite loss value");
  }
  std::vector<double> adj = ad::backward(value);
  Eigen::VectorXd g(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const auto idx = p[static_cast<std::size_t>(i)].idx;
    g[i] = idx >= 0 ? adj[static_cast<std::size_t>(idx)] : 0.0;
  }
  return g;
}

}  // namespace bc

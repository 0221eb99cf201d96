#include "boltzcurve/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace bc {

Mlp::Mlp(std::vector<int> layer_widths) : widths(std::move(layer_widths)) {
  if (widths.size() < 2) {
    throw std::invalid_argument("Mlp requires at least input and output widths");
  }
  for (int w : widths) {
    if (w <= 0) throw std::invalid_argument("Mlp widths must be positive");
  }
  params = Eigen::VectorXd::Zero(param_count());
}

std::ptrdiff_t Mlp::param_count(const std::vector<int>& widths) {
  std::ptrdiff_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    n += static_cast<std::ptrdiff_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return n;
}

std::ptrdiff_t Mlp::weight_offset(int layer) const {
  std::ptrdiff_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::ptrdiff_t>(widths[static_cast<std::size_t>(l)]) *
               widths[static_cast<std::size_t>(l) + 1] +
           widths[static_cast<std::size_t>(l) + 1];
  }
  return off;
}

std::ptrdiff_t Mlp::bias_offset(int layer) const {
  return weight_offset(layer) +
         static_cast<std::ptrdiff_t>(widths[static_cast<std::size_t>(layer)]) *
             widths[static_cast<std::size_t>(layer) + 1];
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int layer) const {
  return {params.data() + weight_offset(layer),
          widths[static_cast<std::size_t>(layer) + 1],
          widths[static_cast<std::size_t>(layer)]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int layer) const {
  return {params.data() + bias_offset(layer),
          widths[static_cast<std::size_t>(layer) + 1]};
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(int layer) {
  return {params.data() + weight_offset(layer),
          widths[static_cast<std::size_t>(layer) + 1],
          widths[static_cast<std::size_t>(layer)]};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(int layer) {
  return {params.data() + bias_offset(layer),
          widths[static_cast<std::size_t>(layer) + 1]};
}

void Mlp::init_params(Rng& rng) {
  for (int l = 0; l < n_layers(); ++l) {
    const double bound =
        1.0 / std::sqrt(static_cast<double>(widths[static_cast<std::size_t>(l)]));
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = rng.uniform(-bound, bound);
      }
    }
    bias(l).setZero();
  }
}

Eigen::VectorXd mlp_forward(const Mlp& net, double t, const Eigen::VectorXd& x) {
  if (x.size() + 1 != net.input_width()) {
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  }
  Eigen::VectorXd a(net.input_width());
  a[0] = t;
  a.tail(x.size()) = x;
  Eigen::VectorXd z;
  for (int l = 0; l < net.n_layers(); ++l) {
    z.noalias() = net.weight(l) * a;
    z += net.bias(l);
    if (l + 1 < net.n_layers()) {
      a = z.array() * (1.0 + (-z.array()).exp()).inverse();
    } else {
      a = z;
    }
  }
  return a;
}

}  // namespace bc

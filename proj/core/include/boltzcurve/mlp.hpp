#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "boltzcurve/dual.hpp"
#include "boltzcurve/rng.hpp"

namespace bc {

template <class T>
T swish(const T& x) {
  return x * sigmoid(x);
}

/// Fully connected network with swish hidden activations and a linear output
/// layer. Inputs are (t, x) concatenated, t first. Parameters live in one flat
/// vector, per layer: weight matrix (column-major) followed by the bias.
struct Mlp {
  std::vector<int> widths;      // e.g. {3, 128, 128, 128, 1}
  Eigen::VectorXd params;

  Mlp() = default;
  explicit Mlp(std::vector<int> layer_widths);

  bool empty() const { return widths.empty(); }
  int n_layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }

  /// Sum over layers of in*out + out.
  static std::ptrdiff_t param_count(const std::vector<int>& widths);
  std::ptrdiff_t param_count() const { return param_count(widths); }

  std::ptrdiff_t weight_offset(int layer) const;
  std::ptrdiff_t bias_offset(int layer) const;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  void init_params(Rng& rng);
};

/// Feed-forward evaluation at (t, x); x must have input_width()-1 entries.
Eigen::VectorXd mlp_forward(const Mlp& net, double t, const Eigen::VectorXd& x);

/// Generic forward pass over an arbitrary scalar type R (dual numbers, tape
/// variables, nested combinations). Parameters of type P are lifted into R
/// entrywise; the arithmetic matches mlp_forward up to association order.
template <class R, class P>
std::vector<R> mlp_forward_generic(const Mlp& net, std::span<const P> params,
                                   std::span<const R> input) {
  std::vector<R> act(input.begin(), input.end());
  std::vector<R> next;
  std::ptrdiff_t off = 0;
  for (int l = 0; l < net.n_layers(); ++l) {
    const int in = net.widths[static_cast<std::size_t>(l)];
    const int out = net.widths[static_cast<std::size_t>(l) + 1];
    next.assign(static_cast<std::size_t>(out), R(0.0));
    for (int i = 0; i < out; ++i) {
      R acc = R(params[static_cast<std::size_t>(off + in * out + i)]);  // bias
      for (int j = 0; j < in; ++j) {
        acc = acc + R(params[static_cast<std::size_t>(off + j * out + i)]) *
                        act[static_cast<std::size_t>(j)];
      }
      next[static_cast<std::size_t>(i)] =
          (l + 1 < net.n_layers()) ? swish(acc) : acc;
    }
    act.swap(next);
    off += static_cast<std::ptrdiff_t>(in) * out + out;
  }
  return act;
}

}  // namespace bc

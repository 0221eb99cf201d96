#include "boltzcurve/backprop.hpp"

#include <stdexcept>

namespace bc {

void MlpSweep::forward(const Mlp& net, double t, const Eigen::VectorXd& x,
                       const SweepConfig& cfg) {
  if (x.size() + 1 != net.input_width()) {
    throw std::invalid_argument("MlpSweep: input dimension mismatch");
  }
  if (cfg.space_dims > x.size()) {
    throw std::invalid_argument("MlpSweep: more spatial seeds than inputs");
  }
  cfg_ = cfg;
  layers_ = net.n_layers();
  const int K = cfg.n_seeds();
  const int Ks = cfg.n_second();

  const auto slots = static_cast<std::size_t>(layers_) + 1;
  a_.resize(slots);
  u_.resize(slots);
  v_.resize(slots);
  z_.resize(slots);
  uz_.resize(slots);
  vz_.resize(slots);
  phi1_.resize(slots);
  phi2_.resize(slots);
  phi3_.resize(slots);

  const int in0 = net.input_width();
  a_[0].resize(in0);
  a_[0][0] = t;
  a_[0].tail(x.size()) = x;
  u_[0].setZero(in0, K);
  for (int j = 0; j < cfg.space_dims; ++j) u_[0](1 + j, j) = 1.0;
  if (cfg.time) u_[0](0, cfg.space_dims) = 1.0;
  v_[0].setZero(in0, Ks);

  for (int l = 1; l <= layers_; ++l) {
    const auto W = net.weight(l - 1);
    const auto b = net.bias(l - 1);
    const std::size_t li = static_cast<std::size_t>(l);
    auto& z = z_[li];
    auto& uz = uz_[li];
    auto& vz = vz_[li];
    z.noalias() = W * a_[li - 1];
    z += b;
    uz.noalias() = W * u_[li - 1];
    vz.noalias() = W * v_[li - 1];

    if (l < layers_) {
      // swish phi(z) = z s(z) and its derivatives through s' = s(1-s):
      //   phi'   = s + z s'
      //   phi''  = 2s' + z s''          s'' = s'(1-2s)
      //   phi''' = 3s'' + z s'''        s''' = s''(1-2s) - 2s'^2
      auto& s = s_;
      s = (1.0 + (-z.array()).exp()).inverse().matrix();
      sp_ = s.array() * (1.0 - s.array());
      auto& phi1 = phi1_[li];
      phi1 = s.array() + z.array() * sp_.array();
      a_[li] = z.array() * s.array();
      u_[li].resize(z.size(), K);
      for (int k = 0; k < K; ++k) {
        u_[li].col(k) = phi1.array() * uz.col(k).array();
      }
      v_[li].resize(z.size(), Ks);
      spp_ = sp_.array() * (1.0 - 2.0 * s.array());
      auto& phi2 = phi2_[li];
      phi2 = 2.0 * sp_.array() + z.array() * spp_.array();
      for (int k = 0; k < Ks; ++k) {
        v_[li].col(k) = phi2.array() * uz.col(k).array().square() +
                        phi1.array() * vz.col(k).array();
      }
      if (Ks > 0) {
        phi3_[li] = 3.0 * spp_.array() +
                    z.array() * (spp_.array() * (1.0 - 2.0 * s.array()) -
                                 2.0 * sp_.array() * sp_.array());
      }
    } else {
      a_[li] = z;
      u_[li] = uz;
      v_[li] = vz;
    }
  }
}

void MlpSweep::backward(const Mlp& net, const Eigen::VectorXd& abar,
                        const Eigen::MatrixXd& ubar, const Eigen::MatrixXd& vbar,
                        std::span<double> grad) {
  if (static_cast<std::ptrdiff_t>(grad.size()) != net.param_count()) {
    throw std::invalid_argument("MlpSweep::backward: gradient size mismatch");
  }
  const int K = cfg_.n_seeds();
  const int Ks = cfg_.n_second();
  const int n_out = net.output_width();

  abar_cur_ = abar.size() > 0 ? abar : Eigen::VectorXd::Zero(n_out).eval();
  ubar_cur_ = ubar.size() > 0 ? ubar : Eigen::MatrixXd::Zero(n_out, K).eval();
  vbar_cur_ = vbar.size() > 0 ? vbar : Eigen::MatrixXd::Zero(n_out, Ks).eval();

  for (int l = layers_; l >= 1; --l) {
    const std::size_t li = static_cast<std::size_t>(l);
    const auto& uz = uz_[li];
    const auto& vz = vz_[li];

    if (l < layers_) {
      const auto& phi1 = phi1_[li];
      const auto& phi2 = phi2_[li];
      const auto& phi3 = phi3_[li];

      // a = phi(z), U_k = phi' Uz_k, V_k = phi'' Uz_k^2 + phi' Vz_k
      zbar_ = (phi1.array() * abar_cur_.array()).matrix();
      for (int k = 0; k < K; ++k) {
        zbar_.array() +=
            phi2.array() * uz.col(k).array() * ubar_cur_.col(k).array();
      }
      uzbar_.resize(zbar_.size(), K);
      for (int k = 0; k < K; ++k) {
        uzbar_.col(k) = phi1.array() * ubar_cur_.col(k).array();
      }
      vzbar_.resize(zbar_.size(), Ks);
      for (int k = 0; k < Ks; ++k) {
        zbar_.array() += (phi3.array() * uz.col(k).array().square() +
                          phi2.array() * vz.col(k).array()) *
                         vbar_cur_.col(k).array();
        uzbar_.col(k).array() +=
            2.0 * phi2.array() * uz.col(k).array() * vbar_cur_.col(k).array();
        vzbar_.col(k) = phi1.array() * vbar_cur_.col(k).array();
      }
    } else {
      zbar_ = abar_cur_;
      uzbar_ = ubar_cur_;
      vzbar_ = vbar_cur_;
    }

    const auto W = net.weight(l - 1);
    const int rows = net.widths[li];
    const int cols = net.widths[li - 1];
    Eigen::Map<Eigen::MatrixXd> wbar(grad.data() + net.weight_offset(l - 1),
                                     rows, cols);
    Eigen::Map<Eigen::VectorXd> bbar(grad.data() + net.bias_offset(l - 1), rows);
    wbar.noalias() += zbar_ * a_[li - 1].transpose();
    wbar.noalias() += uzbar_ * u_[li - 1].transpose();
    if (Ks > 0) wbar.noalias() += vzbar_ * v_[li - 1].transpose();
    bbar += zbar_;

    if (l > 1) {
      abar_cur_.noalias() = W.transpose() * zbar_;
      ubar_cur_.noalias() = W.transpose() * uzbar_;
      if (Ks > 0) vbar_cur_.noalias() = W.transpose() * vzbar_;
    }
  }
}

}  // namespace bc

#include "boltzcurve/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "boltzcurve/parallel.hpp"

namespace bc {

namespace {

// Dormand-Prince 4(5) tableau, FSAL.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA2[1] = {1.0 / 5};
constexpr double kA3[2] = {3.0 / 40, 9.0 / 40};
constexpr double kA4[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
constexpr double kA5[4] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561,
                           -212.0 / 729};
constexpr double kA6[5] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247,
                           49.0 / 176, -5103.0 / 18656};
constexpr double kA7[6] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84};
// y5 - y4 weights for the embedded error estimate.
constexpr double kE[7] = {71.0 / 57600, 0.0,           -71.0 / 16695,
                          71.0 / 1920,  -17253.0 / 339200,
                          22.0 / 525,   -1.0 / 40};

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

class Dopri5 {
 public:
  Dopri5(const OdeRhs& f, Eigen::Index n) : f_(f) {
    for (auto& k : k_) k.resize(n);
    y_stage_.resize(n);
    y_new_.resize(n);
    err_.resize(n);
  }

  Eigen::VectorXd run(Eigen::VectorXd y, double t0, double t1,
                      const SolverConfig& cfg) {
    if (t0 == t1) {
      throw std::invalid_argument("integrate: t0 == t1");
    }
    const double dir = t1 > t0 ? 1.0 : -1.0;
    double t = t0;
    f_(t, y, k_[0]);
    if (!all_finite(k_[0]) || !all_finite(y)) {
      throw IntegrationError(IntegrationError::Kind::non_finite,
                             "integrate: non-finite state or field at t0");
    }
    double h = dir * initial_step(y, t0, t1, cfg);

    // Hairer dopri5 controller defaults within the clamp [0.2, 10].
    constexpr double kSafety = 0.9;
    constexpr double kBeta = 0.04;
    constexpr double kExpo1 = 0.2 - kBeta * 0.75;
    constexpr double kFacc1 = 5.0;  // max shrink: h/5
    constexpr double kFacc2 = 0.1;  // max growth: 10h
    double facold = 1e-4;
    bool rejected = false;
    int nan_streak = 0;

    for (long step = 0; step < cfg.max_steps; ++step) {
      if ((t + h - t1) * dir > 0.0) h = t1 - t;
      if (t + h == t) {
        throw IntegrationError(IntegrationError::Kind::step_underflow,
                               "integrate: step size underflow at t = " +
                                   std::to_string(t));
      }

      stages(t, y, h);
      const double err = error_norm(y, cfg);

      if (!std::isfinite(err)) {
        if (++nan_streak > 25) {
          throw IntegrationError(IntegrationError::Kind::non_finite,
                                 "integrate: repeated non-finite stages");
        }
        h *= 0.5;
        rejected = true;
        continue;
      }
      nan_streak = 0;

      const double fac11 = std::pow(err, kExpo1);
      if (err <= 1.0) {
        t += h;
        y.swap(y_new_);
        k_[0].swap(k_[6]);  // FSAL
        facold = std::max(err, 1e-4);
        double fac = fac11 / std::pow(facold, kBeta);
        fac = std::max(kFacc2, std::min(kFacc1, fac / kSafety));
        double h_new = h / fac;
        if (rejected) {
          h_new = dir * std::min(std::abs(h_new), std::abs(h));
          rejected = false;
        }
        h = h_new;
        if ((t - t1) * dir >= 0.0) return y;
      } else {
        h = h / std::min(kFacc1, fac11 / kSafety);
        rejected = true;
      }
    }
    throw IntegrationError(IntegrationError::Kind::max_steps,
                           "integrate: max_steps exceeded");
  }

 private:
  double initial_step(const Eigen::VectorXd& y0, double t0, double t1,
                      const SolverConfig& cfg) {
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const auto sc = (cfg.atol + cfg.rtol * y0.array().abs()).eval();
    const double d0 = std::sqrt((y0.array() / sc).square().mean());
    const double d1 = std::sqrt((k_[0].array() / sc).square().mean());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
    h0 = std::min(h0, std::abs(t1 - t0));
    y_stage_ = y0 + dir * h0 * k_[0];
    f_(t0 + dir * h0, y_stage_, k_[1]);
    const double d2 =
        std::sqrt(((k_[1] - k_[0]).array() / sc).square().mean()) / h0;
    double h1;
    if (std::max(d1, d2) <= 1e-15) {
      h1 = std::max(1e-6, h0 * 1e-3);
    } else {
      h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
    }
    if (!std::isfinite(h1)) h1 = h0;  // probe hit a bad region; start small
    return std::min({100.0 * h0, h1, std::abs(t1 - t0)});
  }

  void stages(double t, const Eigen::VectorXd& y, double h) {
    y_stage_ = y + h * (kA2[0] * k_[0]);
    f_(t + kC[1] * h, y_stage_, k_[1]);
    y_stage_ = y + h * (kA3[0] * k_[0] + kA3[1] * k_[1]);
    f_(t + kC[2] * h, y_stage_, k_[2]);
    y_stage_ = y + h * (kA4[0] * k_[0] + kA4[1] * k_[1] + kA4[2] * k_[2]);
    f_(t + kC[3] * h, y_stage_, k_[3]);
    y_stage_ = y + h * (kA5[0] * k_[0] + kA5[1] * k_[1] + kA5[2] * k_[2] +
                        kA5[3] * k_[3]);
    f_(t + kC[4] * h, y_stage_, k_[4]);
    y_stage_ = y + h * (kA6[0] * k_[0] + kA6[1] * k_[1] + kA6[2] * k_[2] +
                        kA6[3] * k_[3] + kA6[4] * k_[4]);
    f_(t + kC[5] * h, y_stage_, k_[5]);
    y_new_ = y + h * (kA7[0] * k_[0] + kA7[2] * k_[2] + kA7[3] * k_[3] +
                      kA7[4] * k_[4] + kA7[5] * k_[5]);
    f_(t + h, y_new_, k_[6]);
    err_ = h * (kE[0] * k_[0] + kE[2] * k_[2] + kE[3] * k_[3] + kE[4] * k_[4] +
                kE[5] * k_[5] + kE[6] * k_[6]);
  }

  double error_norm(const Eigen::VectorXd& y, const SolverConfig& cfg) const {
    const auto sc =
        (cfg.atol + cfg.rtol * y.array().abs().max(y_new_.array().abs())).eval();
    return std::sqrt((err_.array() / sc).square().mean());
  }

  const OdeRhs& f_;
  Eigen::VectorXd k_[7];
  Eigen::VectorXd y_stage_, y_new_, err_;
};

Eigen::VectorXd euler_run(const OdeRhs& f, Eigen::VectorXd y, double t0,
                          double t1, const SolverConfig& cfg) {
  const int n = std::max(1, cfg.euler_steps);
  const double h = (t1 - t0) / n;
  Eigen::VectorXd dy(y.size());
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * h;
    f(t, y, dy);
    y += h * dy;
    if (!all_finite(y)) {
      throw IntegrationError(
          IntegrationError::Kind::non_finite,
          "euler: non-finite state at t = " + std::to_string(t));
    }
  }
  return y;
}

}  // namespace

Eigen::VectorXd integrate(const OdeRhs& f, const Eigen::VectorXd& x0, double t0,
                          double t1, const SolverConfig& cfg) {
  if (cfg.method == SolverConfig::Method::euler) {
    return euler_run(f, x0, t0, t1, cfg);
  }
  Dopri5 solver(f, x0.size());
  return solver.run(x0, t0, t1, cfg);
}

AugmentedState integrate_with_logdet(const FlowFieldEval& field,
                                     const Eigen::VectorXd& x0, double t0,
                                     double t1, const SolverConfig& cfg) {
  const Eigen::Index d = x0.size();
  Eigen::VectorXd v_buf(d);
  OdeRhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    double div = 0.0;
    field(t, y.head(d), v_buf, &div);  // augmented state: [x; logdet]
    dy.resize(d + 1);
    dy.head(d) = v_buf;
    dy[d] = div;
  };
  Eigen::VectorXd y0(d + 1);
  y0.head(d) = x0;
  y0[d] = 0.0;
  const Eigen::VectorXd y1 = integrate(rhs, y0, t0, t1, cfg);
  return AugmentedState{y1.head(d), y1[d]};
}

FlowFieldEval make_flow_field(const FlowModel& m) {
  auto eval = std::make_shared<ModelEval>(m);
  return [eval](double t, const Eigen::VectorXd& x, Eigen::VectorXd& v,
                double* div) {
    if (div != nullptr) {
      VelDiv vd = eval->velocity_and_divergence(t, x);
      v = std::move(vd.v);
      *div = vd.div;
    } else {
      v = eval->velocity(t, x);
    }
  };
}

SampleResult sample_backward(const FlowModel& m, const Eigen::VectorXd& z,
                             const SolverConfig& cfg) {
  const bool data_at_zero = m.kind == InterpKind::gradflow;
  const double t0 = data_at_zero ? 1.0 : 0.0;
  const double t1 = data_at_zero ? 0.0 : 1.0;
  FlowFieldEval field = make_flow_field(m);
  AugmentedState end = integrate_with_logdet(field, z, t0, t1, cfg);
  SampleResult out;
  out.x = std::move(end.x);
  out.logq = -m.latent->energy(z) - end.logdet;
  return out;
}

BatchSampleResult transport_batch(
    const std::function<FlowFieldEval()>& field_factory, double t0, double t1,
    const std::function<double(const Eigen::VectorXd&)>& latent_log_density,
    Eigen::MatrixXd z_batch, const SolverConfig& cfg,
    const std::function<Eigen::VectorXd()>& redraw, int threads) {
  const long n = z_batch.rows();
  const Eigen::Index d = z_batch.cols();

  BatchSampleResult out;
  out.x.resize(n, d);
  out.logq.resize(n);

  std::vector<long> pending(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) pending[static_cast<std::size_t>(i)] = i;
  long redraws = 0;

  while (!pending.empty()) {
    std::vector<char> failed(pending.size(), 0);
    parallel_chunks(static_cast<long>(pending.size()), 16, threads,
                    [&](long, long begin, long end_) {
                      FlowFieldEval field = field_factory();
                      for (long k = begin; k < end_; ++k) {
                        const long i = pending[static_cast<std::size_t>(k)];
                        try {
                          const Eigen::VectorXd z = z_batch.row(i).transpose();
                          AugmentedState st =
                              integrate_with_logdet(field, z, t0, t1, cfg);
                          if (!st.x.allFinite() || !std::isfinite(st.logdet)) {
                            throw IntegrationError(
                                IntegrationError::Kind::non_finite,
                                "non-finite endpoint");
                          }
                          out.x.row(i) = st.x.transpose();
                          out.logq[i] = latent_log_density(z) - st.logdet;
                        } catch (const IntegrationError&) {
                          if (cfg.nan_policy == SolverConfig::NanPolicy::error) {
                            throw;
                          }
                          failed[static_cast<std::size_t>(k)] = 1;
                        }
                      }
                    });

    std::vector<long> next;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      if (failed[k]) next.push_back(pending[k]);
    }
    if (!next.empty()) {
      redraws += static_cast<long>(next.size());
      if (static_cast<double>(redraws) > 0.1 * static_cast<double>(n)) {
        throw IntegrationError(
            IntegrationError::Kind::non_finite,
            "sampling: resample rate exceeded 10% (" + std::to_string(redraws) +
                " redraws for " + std::to_string(n) + " particles)");
      }
      for (long i : next) z_batch.row(i) = redraw().transpose();
    }
    pending.swap(next);
  }

  out.resampled = redraws;
  out.resample_rate =
      n > 0 ? static_cast<double>(redraws) / static_cast<double>(n) : 0.0;
  return out;
}

BatchSampleResult sample_batch(const FlowModel& m, long n,
                               const SolverConfig& cfg, Rng& rng, int threads) {
  const auto* gauss = dynamic_cast<const GaussianEnergy*>(m.latent.get());
  if (gauss == nullptr) {
    throw std::logic_error("sample_batch: latent must be Gaussian");
  }
  const double sigma = gauss->sigma();
  const int d = m.dim();
  auto redraw = [&rng, sigma, d]() {
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z[j] = sigma * rng.normal();
    return z;
  };
  Eigen::MatrixXd zs(n, d);
  for (long i = 0; i < n; ++i) zs.row(i) = redraw().transpose();
  const bool data_at_zero = m.kind == InterpKind::gradflow;
  auto factory = [&m]() { return make_flow_field(m); };
  auto latent_logp = [&m](const Eigen::VectorXd& z) {
    return -m.latent->energy(z);
  };
  return transport_batch(factory, data_at_zero ? 1.0 : 0.0,
                         data_at_zero ? 0.0 : 1.0, latent_logp, std::move(zs),
                         cfg, redraw, threads);
}

BatchSampleResult euler_with_nan_resample(const FlowModel& m,
                                          const Eigen::MatrixXd& z_batch,
                                          const SolverConfig& cfg, Rng& rng,
                                          int threads) {
  if (cfg.nan_policy != SolverConfig::NanPolicy::resample) {
    throw std::invalid_argument(
        "euler_with_nan_resample requires nan_policy = resample");
  }
  const auto* gauss = dynamic_cast<const GaussianEnergy*>(m.latent.get());
  if (gauss == nullptr) {
    throw std::logic_error("euler_with_nan_resample: latent must be Gaussian");
  }
  const double sigma = gauss->sigma();
  const int d = m.dim();
  auto redraw = [&rng, sigma, d]() {
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z[j] = sigma * rng.normal();
    return z;
  };
  SolverConfig euler_cfg = cfg;
  euler_cfg.method = SolverConfig::Method::euler;
  const bool data_at_zero = m.kind == InterpKind::gradflow;
  auto factory = [&m]() { return make_flow_field(m); };
  auto latent_logp = [&m](const Eigen::VectorXd& z) {
    return -m.latent->energy(z);
  };
  return transport_batch(factory, data_at_zero ? 1.0 : 0.0,
                         data_at_zero ? 0.0 : 1.0, latent_logp, z_batch,
                         euler_cfg, redraw, threads);
}

}  // namespace bc

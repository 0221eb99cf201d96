#include "boltzcurve/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boltzcurve/diffops.hpp"

namespace bc {

const char* to_string(InterpKind kind) {
  switch (kind) {
    case InterpKind::linear: return "linear";
    case InterpKind::learned: return "learned";
    case InterpKind::gradflow: return "gradflow";
  }
  return "?";
}

InterpKind interp_kind_from_string(const std::string& s) {
  if (s == "linear") return InterpKind::linear;
  if (s == "learned") return InterpKind::learned;
  if (s == "gradflow") return InterpKind::gradflow;
  throw std::invalid_argument("unknown interpolation kind '" + s + "'");
}

double VpSchedule::beta(double t) const {
  if (t < 0.0 || t > 1.0) {
    throw std::domain_error("VpSchedule::beta: t outside [0,1]");
  }
  return beta_min + t * (beta_max - beta_min);
}

double VpSchedule::g_vp(double t) const {
  if (t < 0.0 || t > 1.0) {
    throw std::domain_error("VpSchedule::g_vp: t outside [0,1]");
  }
  // exact integral of the affine rate: the trapezoid t (beta(0) + beta(t))/2
  return 0.5 * t * (beta_min + (beta_min + t * (beta_max - beta_min)));
}

Eigen::VectorXd ou_interpolant(const VpSchedule& vp, double t,
                               const Eigen::VectorXd& z,
                               const Eigen::VectorXd& x0) {
  if (z.size() != x0.size()) {
    throw std::invalid_argument("ou_interpolant: dimension mismatch");
  }
  const double g = vp.g_vp(t);
  const double noise = std::sqrt(-std::expm1(-g));
  const double keep = std::exp(-0.5 * g);
  return noise * z + keep * x0;
}

double Scheduler::value(double t) const {
  const double h_val = mlp_forward(h, t, Eigen::VectorXd())[0];
  return (1.0 - t) + t * (1.0 - t) * h_val;
}

double Scheduler::deriv(double t) const {
  const double h_val = mlp_forward(h, t, Eigen::VectorXd())[0];
  const double h_dot = time_partial(h, t, Eigen::VectorXd());
  return -1.0 + (1.0 - 2.0 * t) * h_val + t * (1.0 - t) * h_dot;
}

std::vector<const Mlp*> FlowModel::nets() const {
  std::vector<const Mlp*> out;
  if (!psi.empty()) out.push_back(&psi);
  if (!vel.empty()) out.push_back(&vel);
  if (!cnet.empty()) out.push_back(&cnet);
  if (!sched.h.empty()) out.push_back(&sched.h);
  return out;
}

std::vector<Mlp*> FlowModel::nets() {
  std::vector<Mlp*> out;
  if (!psi.empty()) out.push_back(&psi);
  if (!vel.empty()) out.push_back(&vel);
  if (!cnet.empty()) out.push_back(&cnet);
  if (!sched.h.empty()) out.push_back(&sched.h);
  return out;
}

std::ptrdiff_t FlowModel::flat_param_count() const {
  std::ptrdiff_t n = 0;
  for (const Mlp* net : nets()) n += net->param_count();
  return n;
}

namespace {

std::vector<int> full_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.reserve(hidden.size() + 2);
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

FlowModel make_flow_model(TargetPtr target, TargetPtr latent,
                          const ModelConfig& cfg, std::uint64_t init_seed) {
  if (!target || !latent) {
    throw std::invalid_argument("make_flow_model: null target/latent");
  }
  if (target->dim() != latent->dim()) {
    throw std::invalid_argument("make_flow_model: target/latent dim mismatch");
  }
  const auto* gauss = dynamic_cast<const GaussianEnergy*>(latent.get());
  if (gauss == nullptr) {
    throw std::invalid_argument("make_flow_model: latent must be Gaussian");
  }
  if (cfg.kind == InterpKind::gradflow && gauss->sigma() != 1.0) {
    throw std::invalid_argument(
        "make_flow_model: gradflow requires a standard Gaussian latent");
  }

  FlowModel m;
  m.kind = cfg.kind;
  m.target = std::move(target);
  m.latent = std::move(latent);
  m.use_ct = cfg.use_ct;
  m.vp.beta_min = cfg.beta_min;
  m.vp.beta_max = cfg.beta_max;

  const int d = m.target->dim();
  Rng rng(init_seed);
  if (cfg.kind != InterpKind::linear) {
    m.psi = Mlp(full_widths(1 + d, cfg.psi_hidden, 1));
    m.psi.init_params(rng);
  }
  if (cfg.kind != InterpKind::gradflow) {
    m.vel = Mlp(full_widths(1 + d, cfg.v_hidden, d));
    m.vel.init_params(rng);
  }
  if (cfg.use_ct) {
    m.cnet = Mlp(full_widths(1, cfg.c_hidden, 1));
    m.cnet.init_params(rng);
  }
  if (cfg.kind == InterpKind::gradflow) {
    m.sched.h = Mlp(full_widths(1, cfg.g_hidden, 1));
    m.sched.h.init_params(rng);
  }
  return m;
}

double interp_energy(const FlowModel& m, double t, const Eigen::VectorXd& x) {
  switch (m.kind) {
    case InterpKind::linear:
      return (1.0 - t) * m.latent->energy(x) + t * m.target->energy(x);
    case InterpKind::learned:
      return (1.0 - t) * m.latent->energy(x) + t * m.target->energy(x) +
             (t * (1.0 - t)) * mlp_forward(m.psi, t, x)[0];
    case InterpKind::gradflow:
      return m.sched.value(t) * m.target->energy(x) +
             t * mlp_forward(m.psi, t, x)[0];
  }
  throw std::logic_error("interp_energy: bad kind");
}

double continuity_residual_parts(double dt_ft, double c,
                                 const Eigen::VectorXd& grad_ft,
                                 const Eigen::VectorXd& v, double div_v) {
  return dt_ft - c + grad_ft.dot(v) - div_v;
}

double gradflow_residual_parts(double dt_ft, double c,
                               const Eigen::VectorXd& grad_ft, double lap_ft,
                               const Eigen::VectorXd& x, double beta) {
  const double d = static_cast<double>(x.size());
  return dt_ft - c +
         0.5 * beta * (grad_ft.dot(grad_ft - x) - lap_ft + d);
}

namespace {

double clamp_time(double t) {
  return std::clamp(t, kTimeEps, 1.0 - kTimeEps);
}

void check_finite_energy(double e, const char* which) {
  if (!std::isfinite(e)) {
    throw std::runtime_error(std::string("residual: non-finite ") + which +
                             " energy at x");
  }
}

}  // namespace

double ModelEval::residual(double t, const Eigen::VectorXd& x) {
  const FlowModel& m = *m_;
  const double tc = clamp_time(t);
  const int d = m.dim();
  const Eigen::VectorXd no_x;
  tc_ = tc;
  x_ = x;

  double c_val = 0.0;
  if (m.use_ct) {
    c_.forward(m.cnet, tc, no_x, SweepConfig{});
    c_val = c_.value0();
  }

  switch (m.kind) {
    case InterpKind::linear:
    case InterpKind::learned: {
      const double f0 = m.latent->energy(x);
      const double f1 = m.target->energy(x);
      check_finite_energy(f0, "latent");
      check_finite_energy(f1, "target");
      big_g_ = (1.0 - tc) * m.latent->grad(x) + tc * m.target->grad(x);
      double dt_ft = f1 - f0;
      const double tfac = tc * (1.0 - tc);
      if (m.kind == InterpKind::learned) {
        psi_.forward(m.psi, tc, x, SweepConfig{d, true, false});
        dt_ft = dt_ft + (1.0 - 2.0 * tc) * psi_.value0() +
                tfac * psi_.dvalue_dt();
        big_g_ += tfac * psi_.grad();
      }
      vel_.forward(m.vel, tc, x, SweepConfig{d, false, false});
      v_ = vel_.value();
      return continuity_residual_parts(dt_ft, c_val, big_g_, v_, vel_.div());
    }
    case InterpKind::gradflow: {
      fd_ = m.target->energy(x);
      check_finite_energy(fd_, "target");
      gd_ = m.target->grad(x);
      ld_ = m.target->laplacian(x);

      g_.forward(m.sched.h, tc, no_x, SweepConfig{0, true, false});
      const double h_val = g_.value0();
      const double h_dot = g_.dvalue_dt();
      const double tfac = tc * (1.0 - tc);
      const double g_val = (1.0 - tc) + tfac * h_val;
      const double g_der = -1.0 + (1.0 - 2.0 * tc) * h_val + tfac * h_dot;

      psi_.forward(m.psi, tc, x, SweepConfig{d, true, true});
      const double dt_ft = g_der * fd_ + psi_.value0() + tc * psi_.dvalue_dt();
      big_g_ = g_val * gd_ + tc * psi_.grad();
      const double lap_ft = g_val * ld_ + tc * psi_.lap();
      beta_ = m.vp.beta(tc);
      return gradflow_residual_parts(dt_ft, c_val, big_g_, lap_ft, x, beta_);
    }
  }
  throw std::logic_error("residual: bad kind");
}

void ModelEval::residual_backward(double r_bar, std::span<double> grad) {
  const FlowModel& m = *m_;
  const double tc = tc_;
  const int d = m.dim();
  std::size_t off = 0;

  switch (m.kind) {
    case InterpKind::linear:
    case InterpKind::learned: {
      const double tfac = tc * (1.0 - tc);
      if (m.kind == InterpKind::learned) {
        Eigen::VectorXd abar =
            Eigen::VectorXd::Constant(1, r_bar * (1.0 - 2.0 * tc));
        Eigen::MatrixXd ubar(1, d + 1);
        ubar.leftCols(d) = (r_bar * tfac) * v_.transpose();
        ubar(0, d) = r_bar * tfac;
        psi_.backward(m.psi, abar, ubar, Eigen::MatrixXd(),
                      grad.subspan(off, static_cast<std::size_t>(m.psi.param_count())));
        off += static_cast<std::size_t>(m.psi.param_count());
      }
      Eigen::VectorXd vbar = r_bar * big_g_;
      Eigen::MatrixXd ubar = Eigen::MatrixXd::Zero(d, d);
      ubar.diagonal().setConstant(-r_bar);
      vel_.backward(m.vel, vbar, ubar, Eigen::MatrixXd(),
                    grad.subspan(off, static_cast<std::size_t>(m.vel.param_count())));
      off += static_cast<std::size_t>(m.vel.param_count());
      if (m.use_ct) {
        c_.backward(m.cnet, Eigen::VectorXd::Constant(1, -r_bar),
                    Eigen::MatrixXd(), Eigen::MatrixXd(),
                    grad.subspan(off, static_cast<std::size_t>(m.cnet.param_count())));
      }
      return;
    }
    case InterpKind::gradflow: {
      const double tfac = tc * (1.0 - tc);
      const Eigen::VectorXd gbar = (r_bar * 0.5 * beta_) * (2.0 * big_g_ - x_);
      const double lbar = -r_bar * 0.5 * beta_;
      const double gval_bar = gbar.dot(gd_) + lbar * ld_;
      const double gder_bar = r_bar * fd_;

      Eigen::VectorXd abar = Eigen::VectorXd::Constant(1, r_bar);
      Eigen::MatrixXd ubar(1, d + 1);
      ubar.leftCols(d) = tc * gbar.transpose();
      ubar(0, d) = r_bar * tc;
      Eigen::MatrixXd vbar = Eigen::MatrixXd::Constant(1, d, tc * lbar);
      psi_.backward(m.psi, abar, ubar, vbar,
                    grad.subspan(off, static_cast<std::size_t>(m.psi.param_count())));
      off += static_cast<std::size_t>(m.psi.param_count());

      if (m.use_ct) {
        c_.backward(m.cnet, Eigen::VectorXd::Constant(1, -r_bar),
                    Eigen::MatrixXd(), Eigen::MatrixXd(),
                    grad.subspan(off, static_cast<std::size_t>(m.cnet.param_count())));
        off += static_cast<std::size_t>(m.cnet.param_count());
      }

      const double hbar = tfac * gval_bar + (1.0 - 2.0 * tc) * gder_bar;
      const double hdot_bar = tfac * gder_bar;
      Eigen::MatrixXd hubar(1, 1);
      hubar(0, 0) = hdot_bar;
      g_.backward(m.sched.h, Eigen::VectorXd::Constant(1, hbar), hubar,
                  Eigen::MatrixXd(),
                  grad.subspan(off, static_cast<std::size_t>(m.sched.h.param_count())));
      return;
    }
  }
}

Eigen::VectorXd ModelEval::velocity(double t, const Eigen::VectorXd& x) {
  const FlowModel& m = *m_;
  const int d = m.dim();
  if (m.kind == InterpKind::gradflow) {
    psi_.forward(m.psi, t, x, SweepConfig{d, false, false});
    const double g_val = m.sched.value(t);
    const Eigen::VectorXd big_g = g_val * m.target->grad(x) + t * psi_.grad();
    return (0.5 * m.vp.beta(t)) * (big_g - x);
  }
  vel_.forward(m.vel, t, x, SweepConfig{});
  return vel_.value();
}

VelDiv ModelEval::velocity_and_divergence(double t, const Eigen::VectorXd& x) {
  const FlowModel& m = *m_;
  const int d = m.dim();
  VelDiv out;
  if (m.kind == InterpKind::gradflow) {
    psi_.forward(m.psi, t, x, SweepConfig{d, false, true});
    const double g_val = m.sched.value(t);
    const Eigen::VectorXd big_g = g_val * m.target->grad(x) + t * psi_.grad();
    const double lap_ft = g_val * m.target->laplacian(x) + t * psi_.lap();
    const double half_beta = 0.5 * m.vp.beta(t);
    out.v = half_beta * (big_g - x);
    out.div = half_beta * (lap_ft - static_cast<double>(d));
    return out;
  }
  vel_.forward(m.vel, t, x, SweepConfig{d, false, false});
  out.v = vel_.value();
  out.div = vel_.div();
  return out;
}

double linear_residual(const FlowModel& m, double t, const Eigen::VectorXd& x) {
  if (m.kind != InterpKind::linear) {
    throw std::invalid_argument("linear_residual: model kind is not linear");
  }
  ModelEval eval(m);
  return eval.residual(t, x);
}

double learned_residual(const FlowModel& m, double t, const Eigen::VectorXd& x) {
  if (m.kind != InterpKind::learned) {
    throw std::invalid_argument("learned_residual: model kind is not learned");
  }
  ModelEval eval(m);
  return eval.residual(t, x);
}

double gradflow_residual(const FlowModel& m, double t, const Eigen::VectorXd& x) {
  if (m.kind != InterpKind::gradflow) {
    throw std::invalid_argument("gradflow_residual: model kind is not gradflow");
  }
  ModelEval eval(m);
  return eval.residual(t, x);
}

double residual(const FlowModel& m, double t, const Eigen::VectorXd& x) {
  ModelEval eval(m);
  return eval.residual(t, x);
}

Eigen::VectorXd velocity(const FlowModel& m, double t, const Eigen::VectorXd& x) {
  ModelEval eval(m);
  return eval.velocity(t, x);
}

VelDiv velocity_and_divergence(const FlowModel& m, double t,
                               const Eigen::VectorXd& x) {
  ModelEval eval(m);
  return eval.velocity_and_divergence(t, x);
}

}  // namespace bc

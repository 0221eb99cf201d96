#include "boltzcurve/teleportation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bc {

namespace {

/// (exp(c*u) - 1)/u, continuous through u = 0 where it equals c.
double em(double c, double u) {
  if (u == 0.0) return c;
  return std::expm1(c * u) / u;
}

}  // namespace

/// Per-(t, m) constants. G(x) below is the unnormalized CDF, Z its limit.
struct QuantilePath::Slice {
  double t, m;
  double u;         // 3t - 1
  double inv1t;     // 1/(1+t)
  double e_half;    // exp(-(m/2)(1+t)) = exp((m/2)u - 2tm)
  double e_full;    // exp(-m(1-t))     = exp(m u - 2tm)
  double g_zero;    // G(0)   = 1/(1+t)
  double g_half;    // G(m/2)
  double g_full;    // G(m)
  double z;         // G(inf)

  double unnorm_cdf(double x) const {
    const double one_t = 1.0 / inv1t;  // 1+t
    if (x <= 0.0) return inv1t * std::exp(x * one_t);
    if (x <= 0.5 * m) return 2.0 * inv1t - inv1t * std::exp(-x * one_t);
    if (x <= m) return g_half + e_half * em(x - 0.5 * m, u);
    return g_full + inv1t * (e_full - std::exp(-x * one_t + 2.0 * t * m));
  }

  double quantile(double s) const {
    const double one_t = 1.0 / inv1t;  // 1+t
    const double gs = z * s;           // target unnormalized CDF value
    if (gs <= g_zero) return std::log(gs * one_t) * inv1t;
    if (gs <= g_half) {
      // e^{-x(1+t)} = (g_half - gs)/A + e_half; the direct 2 - gs(1+t) form
      // cancels catastrophically once e_half is at roundoff scale
      return -std::log((g_half - gs) * one_t + e_half) * inv1t;
    }
    if (gs <= g_full) {
      const double delta = (gs - g_half) / e_half;
      if (u == 0.0) return 0.5 * m + delta;  // limit of log1p(u*delta)/u
      const double arg = u * delta;
      if (arg <= -1.0) return m;  // roundoff at the s3 boundary with u < 0
      return 0.5 * m + std::log1p(arg) / u;
    }
    return (2.0 * t * m - std::log((z - gs) * one_t)) * inv1t;
  }

  double log_unnorm_density(double x) const {
    const double one_t = 1.0 + t;
    if (x <= 0.0) return x * one_t;
    if (x <= 0.5 * m) return -x * one_t;
    if (x <= m) return x * u - 2.0 * t * m;
    return -x * one_t + 2.0 * t * m;
  }
};

QuantilePath::Slice QuantilePath::slice(double t) const {
  if (t < 0.0 || t > 1.0) {
    throw std::domain_error("QuantilePath: t outside [0,1]");
  }
  Slice s;
  s.t = t;
  s.m = m_;
  s.u = 3.0 * t - 1.0;
  s.inv1t = 1.0 / (1.0 + t);
  s.e_half = std::exp(-0.5 * m_ * (1.0 + t));
  s.e_full = std::exp(-m_ * (1.0 - t));
  s.g_zero = s.inv1t;
  s.g_half = 2.0 * s.inv1t - s.inv1t * s.e_half;
  s.g_full = s.g_half + s.e_half * em(0.5 * m_, s.u);
  s.z = s.g_full + s.inv1t * s.e_full;
  return s;
}

QuantilePath::QuantilePath(double m) : m_(m) {
  if (m < 0.0) throw std::invalid_argument("QuantilePath: m must be >= 0");
}

double QuantilePath::normalizer(double t) const { return slice(t).z; }

double QuantilePath::cdf(double t, double x) const {
  const Slice s = slice(t);
  return std::min(1.0, s.unnorm_cdf(x) / s.z);
}

double QuantilePath::quantile(double t, double s_val) const {
  if (!(s_val > 0.0 && s_val < 1.0)) {
    throw std::domain_error("QuantilePath::quantile: s outside (0,1)");
  }
  return slice(t).quantile(s_val);
}

double QuantilePath::density(double t, double x) const {
  const Slice s = slice(t);
  return std::exp(s.log_unnorm_density(x)) / s.z;
}

std::array<double, 3> QuantilePath::breakpoints(double t) const {
  const Slice s = slice(t);
  return {s.g_zero / s.z, s.g_half / s.z, s.g_full / s.z};
}

namespace {

/// tanh map of [0,1] onto [0,1] clustering nodes at both ends.
struct TanhGrading {
  double gamma, norm;
  explicit TanhGrading(double g) : gamma(g), norm(std::tanh(g)) {}
  double map(double xi) const {
    return 0.5 * (1.0 + std::tanh(gamma * (2.0 * xi - 1.0)) / norm);
  }
  double deriv(double xi) const {
    const double th = std::tanh(gamma * (2.0 * xi - 1.0));
    return gamma * (1.0 - th * th) / norm;
  }
};

/// Composite Simpson of f over [a,b] through a grading map (n even).
template <class F>
double simpson_graded(const F& f, double a, double b, int n,
                      const TanhGrading& grading) {
  if (b <= a) return 0.0;
  if (n % 2 != 0) ++n;
  const double h = 1.0 / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double xi = i * h;
    const double s = a + (b - a) * grading.map(xi);
    const double jac = (b - a) * grading.deriv(xi);
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * f(s) * jac;
  }
  return sum * h / 3.0;
}

template <class F>
double simpson_uniform(const F& f, double a, double b, int n) {
  if (b <= a) return 0.0;
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  }
  return sum * h / 3.0;
}

}  // namespace

double velocity_norm_sq(double t, double m, const VnormOptions& opts) {
  const QuantilePath path(m);
  const double h = opts.fd_step;
  if (t - h < 0.0 || t + h > 1.0) {
    throw std::domain_error("velocity_norm_sq: t must lie in (fd_step, 1 - fd_step)");
  }

  auto df_dt = [&](double x) {
    const double d_h = (path.cdf(t + h, x) - path.cdf(t - h, x)) / (2.0 * h);
    if (!opts.richardson) return d_h;
    const double h2 = 0.5 * h;
    const double d_h2 = (path.cdf(t + h2, x) - path.cdf(t - h2, x)) / (2.0 * h2);
    return (4.0 * d_h2 - d_h) / 3.0;
  };
  auto integrand = [&](double x) {
    const double d = df_dt(x);
    if (!std::isfinite(d)) {
      throw std::runtime_error("velocity_norm_sq: non-finite dF/dt at x = " +
                               std::to_string(x) + ", t = " + std::to_string(t) +
                               ", m = " + std::to_string(m));
    }
    if (std::abs(d) < opts.noise_floor) return 0.0;
    return d * d / path.density(t, x);
  };

  // tails truncated where log rho has fallen by tail_log_cut; beyond that the
  // true integrand is under e^{-cut} poly while 1/rho amplifies fd noise
  const double x_lo = -opts.tail_log_cut / (1.0 + t);
  const double x_hi =
      std::max(m, (opts.tail_log_cut + 2.0 * t * m) / (1.0 + t));
  const double edges[5] = {x_lo, 0.0, 0.5 * m, m, x_hi};
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (edges[k + 1] > edges[k]) {
      total += simpson_uniform(integrand, edges[k], edges[k + 1],
                               opts.nodes_per_piece);
    }
  }
  return total;
}

namespace {

double alpha_fn(double x, double m) {
  return std::abs(x) - 2.0 * std::min(std::abs(x), std::abs(x - m));
}

/// Moments of alpha under the unnormalized density at time t.
struct AlphaMoments {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
};

AlphaMoments alpha_moments(double t, double m, int n_per_piece) {
  auto weight = [&](double x) {
    const double one_t = 1.0 + t;
    double logw;
    if (x <= 0.0) logw = x * one_t;
    else if (x <= 0.5 * m) logw = -x * one_t;
    else if (x <= m) logw = x * (3.0 * t - 1.0) - 2.0 * t * m;
    else logw = -x * one_t + 2.0 * t * m;
    return std::exp(logw);
  };
  const double x_lo = -60.0;
  const double x_hi = m + 60.0;
  const double edges[5] = {x_lo, 0.0, 0.5 * m, m, x_hi};
  AlphaMoments mom;
  for (int k = 0; k < 4; ++k) {
    if (edges[k + 1] <= edges[k]) continue;
    mom.m0 += simpson_uniform([&](double x) { return weight(x); }, edges[k],
                              edges[k + 1], n_per_piece);
    mom.m1 += simpson_uniform(
        [&](double x) { return alpha_fn(x, m) * weight(x); }, edges[k],
        edges[k + 1], n_per_piece);
    mom.m2 += simpson_uniform(
        [&](double x) {
          const double a = alpha_fn(x, m);
          return a * a * weight(x);
        },
        edges[k], edges[k + 1], n_per_piece);
  }
  return mom;
}

}  // namespace

double fisher_rao_action(double m, const FisherRaoOptions& opts) {
  if (m < 0.0) throw std::invalid_argument("fisher_rao_action: m must be >= 0");
  auto variance = [&](double t) {
    const AlphaMoments mom = alpha_moments(t, m, opts.x_nodes);
    if (!(mom.m0 > 0.0) || !std::isfinite(mom.m2)) {
      throw std::runtime_error("fisher_rao_action: quadrature failed at t = " +
                               std::to_string(t));
    }
    const double mean = mom.m1 / mom.m0;
    return mom.m2 / mom.m0 - mean * mean;
  };
  const TanhGrading grading(opts.tanh_gamma);
  return simpson_graded(variance, 0.0, 1.0, opts.t_nodes, grading);
}

std::vector<double> density_grid(double m) {
  // envelope over t: exp(-f_t) <= max(exp(-f_0), exp(-f_1))
  auto envelope = [&](double x) {
    const double f0 = std::abs(x);
    const double f1 = 2.0 * std::min(std::abs(x), std::abs(x - m));
    return std::exp(-std::min(f0, f1));
  };
  const double c = 3e-4;  // error budget ~3 c^2 over the whole line
  const double h_max = 0.2;
  const double margin = 33.0;

  std::vector<double> grid;
  const double breaks[4] = {0.0, 0.5 * m, m, m + margin};
  double x = -margin;
  grid.push_back(x);
  int next_break = 0;
  while (x < m + margin) {
    double h = std::min(h_max, c * std::pow(envelope(x), -1.0 / 3.0));
    h = std::max(h, 1e-5);
    double x_next = x + h;
    while (next_break < 4 && breaks[next_break] <= x) ++next_break;
    if (next_break < 4 && x_next >= breaks[next_break]) {
      x_next = breaks[next_break];  // land exactly on the kinks
      ++next_break;
    }
    x = std::min(x_next, m + margin);
    grid.push_back(x);
  }
  return grid;
}

}  // namespace bc

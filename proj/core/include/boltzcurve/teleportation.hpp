#pragma once

#include <array>
#include <stdexcept>
#include <vector>

namespace bc {

/// Exact distribution family rho_t ~ exp(-f_t)/Z_t for the 1D interpolation
/// f_t = (1-t)|x| + 2t min(|x|, |x-m|): a Laplacian at 0 flowing mass into a
/// second mode at m. Four smooth pieces split at x in {0, m/2, m}; on the
/// middle-right piece the exponent rate is u = 3t-1, whose sign flip at
/// t = 1/3 is a removable singularity handled through expm1/log1p forms.
class QuantilePath {
 public:
  explicit QuantilePath(double m);

  double mode_offset() const { return m_; }

  /// Normalizer Z_t = int exp(-f_t) dx (Z_0 = 2 for every m).
  double normalizer(double t) const;
  /// CDF of rho_t.
  double cdf(double t, double x) const;
  /// Quantile (inverse CDF) at s in (0, 1).
  double quantile(double t, double s) const;
  /// Normalized density exp(-f_t(x))/Z_t.
  double density(double t, double x) const;
  /// CDF values at the piece boundaries x = 0, m/2, m.
  std::array<double, 3> breakpoints(double t) const;

 private:
  struct Slice;
  Slice slice(double t) const;
  double m_;
};

struct VnormOptions {
  double fd_step = 1e-5;       // central-difference step in t
  bool richardson = true;      // h and h/2 extrapolation
  int nodes_per_piece = 1024;  // Simpson intervals per sub-interval
  double tail_log_cut = 36.0;  // drop tails once log rho falls this far
  double noise_floor = 1e-9;   // dF/dt below this is finite-difference noise
};

/// Squared L2(rho_t) norm of the optimal velocity field,
/// int_0^1 (d/dt Q_t(s))^2 ds. Substituting s = F_t(x) turns this into
/// int (d/dt F_t(x))^2 / rho_t(x) dx, which keeps every quantity at unit
/// scale: the s-form needs sub-interval resolution below e^{-m(1+t)/2} near
/// s2 once the second mode is far. d/dt F by central differences (step 1e-5,
/// Richardson), composite Simpson per piece; node images cluster in s at
/// {0, s1, s2, s3, 1}. Valid for t in [0.001, 0.999].
double velocity_norm_sq(double t, double m, const VnormOptions& opts = {});

struct FisherRaoOptions {
  int x_nodes = 2000;  // Simpson intervals per spatial piece
  int t_nodes = 400;   // Simpson intervals in time (tanh-graded)
  double tanh_gamma = 3.0;
};

/// Fisher-Rao action int_0^1 Var_{rho_t}(f_0 - f_1) dt of the interpolation.
double fisher_rao_action(double m, const FisherRaoOptions& opts = {});

/// x-grid for density curves: steps proportional to the inverse cube root of
/// a density envelope over all t, so that trapezoid integration of any rho_t
/// on the grid is accurate to ~1e-7. Includes the kink points {0, m/2, m}.
std::vector<double> density_grid(double m);

}  // namespace bc

#include <cmath>
#include <functional>
#include <vector>

#include "boltzcurve/teleportation.hpp"
#include "doctest.h"

using namespace bc;

namespace {

// Textbook piecewise CDF, written exactly as derived (the third piece divides
// by -1+3t, so it is only usable away from t = 1/3). Serves as an independent
// oracle for the numerically stable library implementation. `piece` selects
// the branch explicitly so adjacent branches can be compared at a breakpoint.
double textbook_piece(double t, double x, double m, int piece) {
  const double a = 1.0 / (1.0 + t);
  const double b = 1.0 / (-1.0 + 3.0 * t);
  const double e_half = std::exp(-0.5 * m * (1.0 + t));
  const double e_full = std::exp(-m * (1.0 - t));
  switch (piece) {
    case 0: return a * std::exp(x * (1.0 + t));
    case 1: return 2.0 * a - a * std::exp(-x * (1.0 + t));
    case 2:
      return 2.0 * a - (a + b) * e_half +
             b * std::exp(x * (-1.0 + 3.0 * t) - 2.0 * t * m);
    default:
      return 2.0 * a - (a + b) * e_half + (a + b) * e_full -
             a * std::exp(-x * (1.0 + t) + 2.0 * t * m);
  }
}

double textbook_unnormalized_cdf(double t, double x, double m) {
  if (x <= 0.0) return textbook_piece(t, x, m, 0);
  if (x <= 0.5 * m) return textbook_piece(t, x, m, 1);
  if (x <= m) return textbook_piece(t, x, m, 2);
  return textbook_piece(t, x, m, 3);
}

double textbook_normalizer(double t, double m) {
  const double a = 1.0 / (1.0 + t);
  const double b = 1.0 / (-1.0 + 3.0 * t);
  return 2.0 * a - (a + b) * std::exp(-0.5 * m * (1.0 + t)) +
         (a + b) * std::exp(-m * (1.0 - t));
}

double simpson(const std::function<double(double)>& f, double a, double b,
               int n) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

double quadrature_normalizer(double t, double m) {
  auto density = [&](double x) {
    const double f =
        (1.0 - t) * std::abs(x) + 2.0 * t * std::min(std::abs(x), std::abs(x - m));
    return std::exp(-f);
  };
  double z = simpson(density, -60.0, 0.0, 6000);
  if (m > 0.0) {
    z += simpson(density, 0.0, 0.5 * m, 4000);
    z += simpson(density, 0.5 * m, m, 4000);
  }
  z += simpson(density, m, m + 60.0, 6000);
  return z;
}

}  // namespace

TEST_SUITE_BEGIN("teleportation");

TEST_CASE("Z_0 = 2 for every mode offset") {
  for (double m : {0.0, 1.0, 5.0, 15.0, 50.0}) {
    QuantilePath path(m);
    CHECK(std::abs(path.normalizer(0.0) - 2.0) < 1e-9);
  }
}

TEST_CASE("normalizer agrees with the textbook formula and with quadrature") {
  for (double m : {1.0, 5.0, 15.0, 50.0}) {
    QuantilePath path(m);
    for (double t : {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0}) {
      const double z = path.normalizer(t);
      if (std::abs(3.0 * t - 1.0) > 1e-3) {
        CHECK(std::abs(z - textbook_normalizer(t, m)) < 1e-12 * z);
      }
      CHECK(std::abs(z - quadrature_normalizer(t, m)) < 1e-8 * z);
    }
    // right at and around the removable singularity t = 1/3
    for (double t : {1.0 / 3.0, 1.0 / 3.0 + 1e-10, 1.0 / 3.0 - 1e-7}) {
      const double z = path.normalizer(t);
      CHECK(std::abs(z - quadrature_normalizer(t, m)) < 1e-8 * z);
    }
  }
}

TEST_CASE("cdf matches the textbook piecewise formulas away from t = 1/3") {
  QuantilePath path(8.0);
  for (double t : {0.0, 0.15, 0.55, 0.9, 1.0}) {
    const double z = textbook_normalizer(t, 8.0);
    for (double x : {-3.0, 0.0, 1.7, 4.0, 6.5, 8.0, 11.0}) {
      const double expect = textbook_unnormalized_cdf(t, x, 8.0) / z;
      CHECK(std::abs(path.cdf(t, x) - expect) < 1e-10);
    }
  }
}

TEST_CASE("adjacent cdf pieces agree at the breakpoints") {
  for (double m : {2.0, 10.0, 30.0}) {
    for (double t : {0.05, 0.25, 0.5, 0.75, 0.99}) {
      const double breaks[3] = {0.0, 0.5 * m, m};
      for (int k = 0; k < 3; ++k) {
        const double left = textbook_piece(t, breaks[k], m, k);
        const double right = textbook_piece(t, breaks[k], m, k + 1);
        CHECK(std::abs(left - right) < 1e-12);
      }
    }
  }
}

TEST_CASE("cdf limits: 0 far left, 1 far right") {
  QuantilePath path(5.0);
  for (double t : {0.0, 0.4, 1.0}) {
    CHECK(path.cdf(t, -1e6) < 1e-300);
    CHECK(std::abs(path.cdf(t, 1e6) - 1.0) < 1e-12);
  }
}

TEST_CASE("breakpoints are ordered inside (0, 1) and Z stays positive") {
  for (double m : {0.0, 1.0, 15.0, 50.0}) {
    QuantilePath path(m);
    for (double t : {0.0, 0.2, 1.0 / 3.0, 0.6, 1.0}) {
      const auto bp = path.breakpoints(t);
      CHECK(path.normalizer(t) > 0.0);
      CHECK(bp[0] > 0.0);
      CHECK(bp[0] <= bp[1]);
      CHECK(bp[1] <= bp[2]);
      CHECK(bp[2] <= 1.0);
      // strict for moderate m; at m = 50, t = 0 the gap 1 - s3 ~ e^{-50}
      // rounds away in double precision
      if (m <= 15.0) CHECK(bp[2] < 1.0);
    }
  }
}

TEST_CASE("quantile of the symmetric start: median at zero") {
  QuantilePath path(7.0);
  CHECK(std::abs(path.quantile(0.0, 0.5)) < 1e-14);
  CHECK_THROWS_AS(path.quantile(0.2, 0.0), std::domain_error);
  CHECK_THROWS_AS(path.quantile(0.2, 1.0), std::domain_error);
}

TEST_CASE("round trip F(Q(s)) = s over the full grid") {
  for (double m : {1.0, 5.0, 15.0, 50.0}) {
    QuantilePath path(m);
    for (double t : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      for (int i = 1; i <= 999; ++i) {
        const double s = i / 1000.0;
        const double err = std::abs(path.cdf(t, path.quantile(t, s)) - s);
        CHECK(err <= 1e-8);
      }
    }
  }
}

TEST_CASE("round trip Q(F(x)) = x away from the breakpoints") {
  QuantilePath path(12.0);
  for (double t : {0.1, 1.0 / 3.0, 0.7}) {
    for (double x : {-4.0, -1.0, 2.5, 7.0, 10.5, 14.0}) {
      const double s = path.cdf(t, x);
      if (s > 1e-12 && s < 1.0 - 1e-12) {
        CHECK(std::abs(path.quantile(t, s) - x) < 1e-8 * std::max(1.0, std::abs(x)));
      }
    }
  }
}

TEST_CASE("quantile is strictly increasing in s") {
  QuantilePath path(15.0);
  for (double t : {0.0, 1.0 / 3.0, 0.85}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < 1000; ++i) {
      const double q = path.quantile(t, i / 1000.0);
      CHECK(q > prev);
      prev = q;
    }
  }
}

TEST_CASE("m = 0 reduces to the symmetric Laplacian family") {
  QuantilePath path(0.0);
  for (double t : {0.0, 0.3, 1.0 / 3.0, 0.8}) {
    const double rate = 1.0 + t;
    CHECK(std::abs(path.normalizer(t) - 2.0 / rate) < 1e-13);
    for (double s : {0.01, 0.2, 0.5 - 1e-12, 0.6, 0.95}) {
      const double expect = s < 0.5 ? std::log(2.0 * s) / rate
                                    : -std::log(2.0 * (1.0 - s)) / rate;
      CHECK(std::abs(path.quantile(t, s) - expect) < 1e-10);
    }
  }
}

TEST_CASE("velocity norm for m = 0 matches the closed form 2/(1+t)^4") {
  for (double t : {0.1, 0.35, 0.6, 0.9}) {
    const double v = velocity_norm_sq(t, 0.0);
    const double expect = 2.0 / std::pow(1.0 + t, 4);
    CHECK(std::abs(v - expect) < 1e-3 * expect);
  }
}

TEST_CASE("velocity norm reproduces the qualitative explosion picture") {
  // negligible before t ~ 0.7 on the scale of the terminal value, then a
  // steep monotone rise toward t = 1
  const double terminal = velocity_norm_sq(0.999, 30.0);
  CHECK(velocity_norm_sq(0.5, 30.0) < 1e-6 * terminal);
  CHECK(velocity_norm_sq(0.7, 30.0) < 1e-6 * terminal);
  double prev = 0.0;
  for (double t : {0.3, 0.5, 0.7, 0.9, 0.95, 0.999}) {
    const double v = velocity_norm_sq(t, 30.0);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(terminal > 100.0 * velocity_norm_sq(0.9, 30.0));

  // the farther the mode, the later the limit is approached
  auto fraction_at_09 = [](double m) {
    return velocity_norm_sq(0.9, m) / velocity_norm_sq(0.999, m);
  };
  CHECK(fraction_at_09(5.0) > fraction_at_09(15.0));
  CHECK(fraction_at_09(15.0) > fraction_at_09(30.0));

  // and the terminal norm itself explodes with m
  CHECK(velocity_norm_sq(0.999, 30.0) > 10.0 * velocity_norm_sq(0.999, 5.0));
}

TEST_CASE("log of the terminal velocity norm grows roughly linearly in m") {
  std::vector<double> ms, logs;
  for (double m = 2.0; m <= 30.0; m += 2.0) {
    ms.push_back(m);
    logs.push_back(std::log(velocity_norm_sq(0.999, m)));
  }
  const auto n = static_cast<double>(ms.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    sx += ms[i];
    sy += logs[i];
    sxx += ms[i] * ms[i];
    sxy += ms[i] * logs[i];
    syy += logs[i] * logs[i];
  }
  const double r_num = n * sxy - sx * sy;
  const double r2 = (r_num * r_num) / ((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(r2 > 0.95);
  CHECK(r_num > 0.0);  // increasing
}

TEST_CASE("fisher-rao action of the m = 0 family is exactly 1/2") {
  CHECK(std::abs(fisher_rao_action(0.0) - 0.5) < 1e-3);
}

TEST_CASE("fisher-rao action stays finite over the m sweep") {
  FisherRaoOptions coarse;
  coarse.x_nodes = 600;
  coarse.t_nodes = 80;
  double prev = 0.0;
  for (double m : {1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0}) {
    const double action = fisher_rao_action(m, coarse);
    CHECK(std::isfinite(action));
    CHECK(action > 0.0);
    CHECK(action > prev);  // more teleportation, more action
    prev = action;
  }
}

TEST_CASE("time integral of the velocity norm is finite and grows with m") {
  auto integral = [](double m) {
    VnormOptions opts;
    opts.nodes_per_piece = 256;
    double acc = 0.0;
    const int n = 60;
    for (int i = 0; i <= n; ++i) {
      const double t = 0.001 + (0.999 - 0.001) * i / n;
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      acc += w * velocity_norm_sq(t, m, opts);
    }
    return acc * (0.999 - 0.001) / n;
  };
  const double i5 = integral(5.0);
  const double i15 = integral(15.0);
  CHECK(std::isfinite(i5));
  CHECK(std::isfinite(i15));
  CHECK(i15 > i5);
}

TEST_CASE("density grid supports 1e-6 trapezoid normalization") {
  for (double m : {1.0, 5.0, 15.0, 50.0}) {
    const std::vector<double> grid = density_grid(m);
    QuantilePath path(m);
    for (double t : {0.0, 0.3, 1.0 / 3.0, 0.7, 1.0}) {
      double mass = 0.0;
      for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = grid[i + 1] - grid[i];
        mass += 0.5 * h * (path.density(t, grid[i]) + path.density(t, grid[i + 1]));
      }
      CHECK(std::abs(mass - 1.0) < 1e-6);
    }
  }
}

TEST_SUITE_END();

#include <Eigen/Dense>
#include <cmath>

#include "boltzcurve/metrics.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace bc;

namespace {

FlowModel standard_normal_model(int dim) {
  FlowModel m;
  m.kind = InterpKind::linear;
  // target: the same standard normal, unnormalized (f = |x|^2/2)
  m.target = shifted(gaussian_latent(1.0, dim),
                     -0.5 * dim * std::log(2.0 * 3.14159265358979323846));
  m.latent = gaussian_latent(1.0, dim);
  m.vel = Mlp({1 + dim, dim});  // zero net: identity transport
  m.use_ct = false;
  return m;
}

double brute_force_energy_distance(const Eigen::MatrixXd& x,
                                   const Eigen::MatrixXd& y) {
  const long n = x.rows(), m = y.rows();
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < m; ++j) xy += (x.row(i) - y.row(j)).norm();
  }
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      if (i != j) xx += (x.row(i) - x.row(j)).norm();
    }
  }
  for (long i = 0; i < m; ++i) {
    for (long j = 0; j < m; ++j) {
      if (i != j) yy += (y.row(i) - y.row(j)).norm();
    }
  }
  return 2.0 * xy / (static_cast<double>(n) * m) -
         xx / (static_cast<double>(n) * (n - 1)) -
         yy / (static_cast<double>(m) * (m - 1));
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("log weights of a perfectly matched pair are constant") {
  const int n = 500;
  Rng rng(3);
  Eigen::MatrixXd xs(n, 1);
  Eigen::VectorXd logq(n);
  const double log2pi = std::log(2.0 * 3.14159265358979323846);
  for (int i = 0; i < n; ++i) {
    xs(i, 0) = rng.normal();
    logq[i] = -0.5 * xs(i, 0) * xs(i, 0) - 0.5 * log2pi;
  }
  auto target = shifted(gaussian_latent(1.0, 1), -0.5 * log2pi);  // f = x^2/2
  const LogWeightsResult lw = log_weights(*target, xs, logq);
  CHECK(lw.excluded == 0);
  const double expect = 0.5 * log2pi;
  CHECK(std::abs(lw.w.maxCoeff() - expect) < 1e-12);
  CHECK(std::abs(lw.w.minCoeff() - expect) < 1e-12);
  CHECK(ess(lw.w) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("log weights exclude samples with non-finite target energy") {
  Eigen::MatrixXd xs(3, 1);
  xs << 0.0, std::numeric_limits<double>::infinity(), 1.0;
  Eigen::VectorXd logq = Eigen::VectorXd::Zero(3);
  auto target = gaussian_latent(1.0, 1);
  const LogWeightsResult lw = log_weights(*target, xs, logq);
  CHECK(lw.excluded == 1);
  CHECK(lw.w.size() == 2);
}

TEST_CASE("ess identities") {
  CHECK(ess(Eigen::VectorXd::Constant(64, 1.7)) == 1.0);

  // one dominant weight: ESS = 1/N
  Eigen::VectorXd w = Eigen::VectorXd::Constant(
      50, -std::numeric_limits<double>::infinity());
  w[17] = 2.0;
  CHECK(ess(w) == doctest::Approx(1.0 / 50.0).epsilon(1e-14));

  CHECK_THROWS_AS(ess(Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("ess is exactly invariant under constant shifts") {
  // weights on a 2^-20 grid so that adding the (gridded) shift is lossless
  // and the invariance must hold bit for bit
  Rng rng(5);
  Eigen::VectorXd w(200);
  const double grid = std::pow(2.0, -20);
  for (int i = 0; i < 200; ++i) {
    w[i] = std::round(rng.uniform(-3, 3) / grid) * grid;
  }
  const double base = ess(w);
  for (double c : {-128.0, -1.0, 17.25, 350.5}) {
    CHECK(ess((w.array() + c).matrix()) == base);
  }
}

TEST_CASE("ess stays finite for weights spanning +-700") {
  Eigen::VectorXd w(5);
  w << -700.0, -350.0, 0.0, 350.0, 700.0;
  const double e = ess(w);
  CHECK(std::isfinite(e));
  CHECK(e > 0.0);
  CHECK(e <= 1.0);
  CHECK(e == doctest::Approx(1.0 / 5.0).epsilon(1e-10));
}

TEST_CASE("energy distance closed forms and symmetry") {
  // repeated atoms: X = {a}^n, Y = {b}^m -> 2 |a-b|
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, 2);
  Eigen::MatrixXd y(5, 2);
  for (int i = 0; i < 5; ++i) y.row(i) << 3.0, -4.0;
  CHECK(energy_distance(x, y, 1) == doctest::Approx(10.0).epsilon(1e-14));

  // identical multisets: U-statistic is <= 0, within -2 mean/n of zero
  Rng rng(7);
  Eigen::MatrixXd z(100, 3);
  for (int i = 0; i < 300; ++i) z.data()[i] = rng.normal();
  const double same = energy_distance(z, z, 2);
  CHECK(same <= 0.0);
  CHECK(same > -0.1);

  Eigen::MatrixXd w(60, 3);
  for (int i = 0; i < 180; ++i) w.data()[i] = rng.normal() + 0.3;
  CHECK(energy_distance(z, w, 2) == energy_distance(w, z, 2));
  CHECK_THROWS_AS(energy_distance(z, Eigen::MatrixXd::Zero(4, 2), 1),
                  std::invalid_argument);
}

TEST_CASE("energy distance matches the brute-force oracle on 100-point sets") {
  Rng rng(11);
  Eigen::MatrixXd x(100, 2), y(100, 2);
  for (int i = 0; i < 200; ++i) {
    x.data()[i] = rng.normal();
    y.data()[i] = 0.5 * rng.normal() + 1.0;
  }
  const double fast = energy_distance(x, y, 4);
  const double slow = brute_force_energy_distance(x, y);
  CHECK(std::abs(fast - slow) < 1e-10);
}

TEST_CASE("energy distance of equal distributions is near zero") {
  Rng rng(13);
  Eigen::MatrixXd x(4000, 2), y(4000, 2);
  for (int i = 0; i < 8000; ++i) {
    x.data()[i] = rng.normal();
    y.data()[i] = rng.normal();
  }
  // the kernel is degenerate under equal distributions, so the U-statistic
  // fluctuates at the 1/n scale around zero
  const double ed = energy_distance(x, y, 4);
  CHECK(ed > -1e-3);
  CHECK(ed < 1e-3);
}

TEST_CASE("nll of the standard normal model recovers the Gaussian entropy") {
  FlowModel m = standard_normal_model(1);
  Rng rng(17);
  const int n = 100000;
  Eigen::MatrixXd samples(n, 1);
  for (int i = 0; i < n; ++i) samples(i, 0) = rng.normal();
  const NllResult res = nll(m, samples, SolverConfig{}, 4);
  CHECK(res.failed == 0);
  const double expect = 0.5 * (1.0 + std::log(2.0 * 3.14159265358979323846));
  CHECK(std::abs(res.nll - expect) < 0.02);
}

TEST_CASE("nll shifts linearly with the latent log density") {
  // adding a constant to the latent energy shifts NLL by that constant
  FlowModel m = standard_normal_model(1);
  FlowModel m_shift = m;
  m_shift.latent = shifted(gaussian_latent(1.0, 1), 0.75);
  Rng rng(19);
  Eigen::MatrixXd samples(200, 1);
  for (int i = 0; i < 200; ++i) samples(i, 0) = rng.normal();
  const double a = nll(m, samples, SolverConfig{}, 1).nll;
  const double b = nll(m_shift, samples, SolverConfig{}, 1).nll;
  CHECK(b - a == doctest::Approx(0.75).epsilon(1e-10));
}

TEST_CASE("nll fails loudly above 1% integration failures") {
  FlowModel m = standard_normal_model(1);
  Rng rng(23);
  Eigen::MatrixXd samples(300, 1);
  for (int i = 0; i < 300; ++i) samples(i, 0) = rng.normal();
  for (int i = 0; i < 6; ++i) {
    samples(i, 0) = std::numeric_limits<double>::infinity();  // 2% bad
  }
  CHECK_THROWS_AS(nll(m, samples, SolverConfig{}, 2), MetricsError);

  // at 1% or below the failures are excluded and counted
  for (int i = 3; i < 6; ++i) samples(i, 0) = 0.1;
  const NllResult res = nll(m, samples, SolverConfig{}, 2);
  CHECK(res.failed == 3);
  CHECK(std::isfinite(res.nll));
}

TEST_CASE("evaluate_model on the exact model: high ess, consistent summary") {
  FlowModel m = standard_normal_model(2);
  EvalOptions opts;
  opts.n = 400;
  opts.repeats = 4;
  opts.threads = 2;
  const auto reports = evaluate_model(m, SolverConfig{}, opts, 99);
  REQUIRE(reports.size() == 4);
  for (const auto& r : reports) {
    CHECK(r.ok);
    CHECK(r.ess > 0.99);
    CHECK(r.resample_rate == 0.0);
    CHECK(std::isfinite(r.nll));
    CHECK(std::abs(r.energy_distance) < 0.02);  // 1/n-scale U-statistic noise
  }

  // summary mean in the JSON equals the arithmetic mean of the rows
  const auto j = nlohmann::json::parse(metrics_run_json(reports));
  double mean_ess = 0.0;
  for (const auto& r : reports) mean_ess += r.ess;
  mean_ess /= static_cast<double>(reports.size());
  CHECK(std::abs(j["summary"]["ess"]["mean"].get<double>() - mean_ess) < 1e-12);

  // repeats are seeded independently but deterministically
  const auto again = evaluate_model(m, SolverConfig{}, opts, 99);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(again[i].ess == reports[i].ess);
    CHECK(again[i].nll == reports[i].nll);
  }
}

TEST_CASE("metrics csv row carries the run context") {
  MetricsReport r;
  r.ess = 0.5;
  r.nll = 7.0;
  r.energy_distance = 0.01;
  r.n_samples = 100;
  r.seed = 3;
  const auto row = metrics_csv_row(r, "gradflow", "gmm40", 1.0);
  const auto header = metrics_csv_header();
  REQUIRE(row.size() == header.size());
  CHECK(row[0] == "gradflow");
  CHECK(row[1] == "gmm40");
  CHECK(row[4] == "0.5");
}

TEST_SUITE_END();

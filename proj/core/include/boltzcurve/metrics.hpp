#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "boltzcurve/odeint.hpp"

namespace bc {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricsReport {
  double ess = std::numeric_limits<double>::quiet_NaN();
  double nll = std::numeric_limits<double>::quiet_NaN();
  double energy_distance = std::numeric_limits<double>::quiet_NaN();
  long n_samples = 0;
  std::uint64_t seed = 0;
  double resample_rate = 0.0;
  long excluded_weights = 0;  // samples dropped from the ESS for non-finite f_D
  long nll_failures = 0;      // reverse integrations that failed (< 1%)
  long ed_points = 0;         // pair basis actually used for the energy distance
  bool ok = true;
  std::string error;
};

struct LogWeightsResult {
  Eigen::VectorXd w;  // compacted: excluded samples removed
  long excluded = 0;
};

/// Unnormalized importance log weights w_i = -f_D(x_i) - logq_i. Samples with
/// non-finite target energy are excluded and counted.
LogWeightsResult log_weights(const EnergyTarget& target,
                             const Eigen::MatrixXd& xs,
                             const Eigen::VectorXd& logq);

/// Normalized effective sample size (sum e^w)^2 / (N sum e^{2w}) in (0, 1],
/// computed with the max subtracted before exponentiation.
double ess(const Eigen::VectorXd& logw);

struct NllResult {
  double nll = 0.0;
  long failed = 0;
};

/// Negative mean model log density over the given points, obtained by
/// integrating each point to the latent (reverse of the sampling direction)
/// with divergence accumulation. Throws if more than 1% of the integrations
/// fail; below that, failed points are excluded and counted.
NllResult nll(const FlowModel& m, const Eigen::MatrixXd& samples,
              const SolverConfig& cfg, int threads);

/// Unbiased two-sample energy distance 2 E|X-Y| - E|X-X'| - E|Y-Y'| with
/// Euclidean norms, O(N^2) pairwise.
double energy_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       int threads);

struct EvalOptions {
  long n = 50000;
  int repeats = 10;
  int threads = 0;
  long ed_max_points = 10000;  // subsample cap for the O(N^2) energy distance
};

/// Runs `repeats` independent evaluations (sub-seeds drawn from `seed`).
/// Each repeat samples n particles, assembles importance weights against the
/// model target, and computes ESS, NLL on fresh exact target samples, and the
/// energy distance. A failed repeat is reported with ok = false rather than
/// aborting the sweep.
std::vector<MetricsReport> evaluate_model(const FlowModel& m,
                                          const SolverConfig& solver,
                                          const EvalOptions& opts,
                                          std::uint64_t seed);

std::string metrics_report_json(const MetricsReport& r);

/// One JSON object for the whole run: per-repeat reports plus mean/std summary.
std::string metrics_run_json(const std::vector<MetricsReport>& reports);

/// CSV row: kind, target, sigma, seed, ess, nll, energy_distance, n,
/// resample_rate.
std::vector<std::string> metrics_csv_row(const MetricsReport& r,
                                         const std::string& kind,
                                         const std::string& target,
                                         double sigma);
std::vector<std::string> metrics_csv_header();

}  // namespace bc

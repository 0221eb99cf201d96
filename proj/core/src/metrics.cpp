#include "boltzcurve/metrics.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <numeric>

#include "boltzcurve/csv.hpp"
#include "boltzcurve/parallel.hpp"
#include "json.hpp"

namespace bc {

LogWeightsResult log_weights(const EnergyTarget& target,
                             const Eigen::MatrixXd& xs,
                             const Eigen::VectorXd& logq) {
  if (xs.rows() != logq.size()) {
    throw std::invalid_argument("log_weights: sample/logq count mismatch");
  }
  LogWeightsResult out;
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(xs.rows()));
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const double f = target.energy(xs.row(i).transpose());
    if (!std::isfinite(f) || !std::isfinite(logq[i])) {
      ++out.excluded;
      continue;
    }
    w.push_back(-f - logq[i]);
  }
  out.w = Eigen::Map<const Eigen::VectorXd>(w.data(),
                                            static_cast<Eigen::Index>(w.size()));
  return out;
}

double ess(const Eigen::VectorXd& logw) {
  if (logw.size() == 0) throw std::invalid_argument("ess: empty input");
  const double m = logw.maxCoeff();
  const auto shifted = (logw.array() - m).eval();
  const double s1 = shifted.exp().sum();
  const double s2 = (2.0 * shifted).exp().sum();
  return (s1 * s1) / (static_cast<double>(logw.size()) * s2);
}

NllResult nll(const FlowModel& m, const Eigen::MatrixXd& samples,
              const SolverConfig& cfg, int threads) {
  const long n = samples.rows();
  if (n == 0) throw std::invalid_argument("nll: no samples");
  // reverse of the sampling direction: data time -> latent time
  const bool data_at_zero = m.kind == InterpKind::gradflow;
  const double t0 = data_at_zero ? 0.0 : 1.0;
  const double t1 = data_at_zero ? 1.0 : 0.0;

  Eigen::VectorXd logq(n);
  std::vector<char> failed(static_cast<std::size_t>(n), 0);
  parallel_chunks(n, 16, threads, [&](long, long begin, long end) {
    FlowFieldEval field = make_flow_field(m);
    for (long i = begin; i < end; ++i) {
      try {
        AugmentedState st = integrate_with_logdet(
            field, samples.row(i).transpose(), t0, t1, cfg);
        const double v = -m.latent->energy(st.x) + st.logdet;
        if (!std::isfinite(v)) throw IntegrationError(
            IntegrationError::Kind::non_finite, "non-finite log density");
        logq[i] = v;
      } catch (const IntegrationError&) {
        failed[static_cast<std::size_t>(i)] = 1;
      }
    }
  });

  NllResult out;
  double sum = 0.0;
  long good = 0;
  for (long i = 0; i < n; ++i) {
    if (failed[static_cast<std::size_t>(i)]) {
      ++out.failed;
    } else {
      sum += logq[i];
      ++good;
    }
  }
  if (out.failed > n / 100) {
    throw MetricsError("nll: integration failed on " +
                       std::to_string(out.failed) + " of " + std::to_string(n) +
                       " points (> 1%)");
  }
  out.nll = -sum / static_cast<double>(good);
  return out;
}

double energy_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       int threads) {
  if (x.rows() == 0 || y.rows() == 0) {
    throw std::invalid_argument("energy_distance: empty sample set");
  }
  if (x.cols() != y.cols()) {
    throw std::invalid_argument("energy_distance: dimension mismatch");
  }
  // canonicalize the argument order so the summation sequence, and hence the
  // rounded result, is identical for (x, y) and (y, x)
  const bool swap_args =
      y.rows() > x.rows() ||
      (y.rows() == x.rows() &&
       std::memcmp(y.data(), x.data(),
                   static_cast<std::size_t>(x.size()) * sizeof(double)) < 0);
  if (swap_args) return energy_distance(y, x, threads);
  const long n = x.rows();
  const long m = y.rows();

  // per-chunk partial sums reduced in chunk order
  const long chunk = 64;
  const long n_chunks_x = (n + chunk - 1) / chunk;
  Eigen::VectorXd xy_part = Eigen::VectorXd::Zero(n_chunks_x);
  Eigen::VectorXd xx_part = Eigen::VectorXd::Zero(n_chunks_x);
  parallel_chunks(n, chunk, threads, [&](long c, long begin, long end) {
    double sxy = 0.0, sxx = 0.0;
    for (long i = begin; i < end; ++i) {
      const auto xi = x.row(i);
      for (long j = 0; j < m; ++j) sxy += (xi - y.row(j)).norm();
      for (long j = i + 1; j < n; ++j) sxx += (xi - x.row(j)).norm();
    }
    xy_part[c] = sxy;
    xx_part[c] = sxx;
  });
  const long n_chunks_y = (m + chunk - 1) / chunk;
  Eigen::VectorXd yy_part = Eigen::VectorXd::Zero(n_chunks_y);
  parallel_chunks(m, chunk, threads, [&](long c, long begin, long end) {
    double syy = 0.0;
    for (long i = begin; i < end; ++i) {
      for (long j = i + 1; j < m; ++j) syy += (y.row(i) - y.row(j)).norm();
    }
    yy_part[c] = syy;
  });

  const double mean_xy = xy_part.sum() / (static_cast<double>(n) * m);
  const double mean_xx =
      n > 1 ? 2.0 * xx_part.sum() / (static_cast<double>(n) * (n - 1)) : 0.0;
  const double mean_yy =
      m > 1 ? 2.0 * yy_part.sum() / (static_cast<double>(m) * (m - 1)) : 0.0;
  return 2.0 * mean_xy - mean_xx - mean_yy;
}

namespace {

Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& x, long cap, Rng& rng) {
  if (x.rows() <= cap) return x;
  // partial Fisher-Yates over row indices
  std::vector<long> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), 0L);
  for (long i = 0; i < cap; ++i) {
    const auto j =
        i + static_cast<long>(rng.uniform01() * static_cast<double>(x.rows() - i));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(std::min<long>(j, x.rows() - 1))]);
  }
  Eigen::MatrixXd out(cap, x.cols());
  for (long i = 0; i < cap; ++i) out.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

std::vector<MetricsReport> evaluate_model(const FlowModel& m,
                                          const SolverConfig& solver,
                                          const EvalOptions& opts,
                                          std::uint64_t seed) {
  std::vector<MetricsReport> reports;
  Rng master(seed);
  for (int rep = 0; rep < opts.repeats; ++rep) {
    const std::uint64_t sub_seed = master.next_u64();
    MetricsReport r;
    r.seed = sub_seed;
    r.n_samples = opts.n;
    try {
      Rng rng(sub_seed);
      BatchSampleResult gen = sample_batch(m, opts.n, solver, rng, opts.threads);
      r.resample_rate = gen.resample_rate;

      LogWeightsResult lw = log_weights(*m.target, gen.x, gen.logq);
      r.excluded_weights = lw.excluded;
      r.ess = ess(lw.w);

      if (m.target->has_sampler()) {
        Eigen::MatrixXd exact(opts.n, m.dim());
        for (long i = 0; i < opts.n; ++i) {
          exact.row(i) = m.target->sample(rng).transpose();
        }
        NllResult nr = nll(m, exact, solver, opts.threads);
        r.nll = nr.nll;
        r.nll_failures = nr.failed;

        const Eigen::MatrixXd xs = subsample_rows(gen.x, opts.ed_max_points, rng);
        const Eigen::MatrixXd ys = subsample_rows(exact, opts.ed_max_points, rng);
        r.ed_points = std::min(xs.rows(), ys.rows());
        r.energy_distance = energy_distance(xs, ys, opts.threads);
      }
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

namespace {

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["ess"] = r.ess;
  j["nll"] = r.nll;
  j["energy_distance"] = r.energy_distance;
  j["n_samples"] = r.n_samples;
  j["seed"] = r.seed;
  j["resample_rate"] = r.resample_rate;
  j["excluded_weights"] = r.excluded_weights;
  j["nll_failures"] = r.nll_failures;
  j["ed_points"] = r.ed_points;
  j["ok"] = r.ok;
  if (!r.ok) j["error"] = r.error;
  return j;
}

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stdev = std::numeric_limits<double>::quiet_NaN();
};

MeanStd mean_std(const std::vector<MetricsReport>& reports,
                 double MetricsReport::*field) {
  std::vector<double> vals;
  for (const auto& r : reports) {
    if (r.ok && std::isfinite(r.*field)) vals.push_back(r.*field);
  }
  MeanStd out;
  if (vals.empty()) return out;
  out.mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
             static_cast<double>(vals.size());
  if (vals.size() > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - out.mean) * (v - out.mean);
    out.stdev = std::sqrt(ss / static_cast<double>(vals.size() - 1));
  } else {
    out.stdev = 0.0;
  }
  return out;
}

}  // namespace

std::string metrics_report_json(const MetricsReport& r) {
  return report_to_json(r).dump(2);
}

std::string metrics_run_json(const std::vector<MetricsReport>& reports) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : reports) j["runs"].push_back(report_to_json(r));
  nlohmann::json summary;
  const MeanStd e = mean_std(reports, &MetricsReport::ess);
  const MeanStd n = mean_std(reports, &MetricsReport::nll);
  const MeanStd d = mean_std(reports, &MetricsReport::energy_distance);
  summary["ess"] = {{"mean", e.mean}, {"std", e.stdev}};
  summary["nll"] = {{"mean", n.mean}, {"std", n.stdev}};
  summary["energy_distance"] = {{"mean", d.mean}, {"std", d.stdev}};
  j["summary"] = summary;
  return j.dump(2);
}

std::vector<std::string> metrics_csv_header() {
  return {"kind", "target", "sigma",          "seed", "ess",
          "nll",  "energy_distance", "n",    "resample_rate"};
}

std::vector<std::string> metrics_csv_row(const MetricsReport& r,
                                         const std::string& kind,
                                         const std::string& target,
                                         double sigma) {
  return {kind,
          target,
          format_double(sigma),
          std::to_string(r.seed),
          format_double(r.ess),
          format_double(r.nll),
          format_double(r.energy_distance),
          std::to_string(r.n_samples),
          format_double(r.resample_rate)};
}

}  // namespace bc

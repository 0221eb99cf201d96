#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "boltzcurve/csv.hpp"
#include "boltzcurve/metrics.hpp"
#include "boltzcurve/run_config.hpp"
#include "boltzcurve/teleportation.hpp"
#include "boltzcurve/training.hpp"

namespace fs = std::filesystem;
using namespace bc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path,
                              "JSON run configuration");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "overrides the config seed");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--threads", flags.threads,
                  "worker threads (default: machine parallelism)");
  cmd->allow_extras();  // dotted-key overrides, e.g. --training.iterations 500
}

/// Remaining tokens come in "--dotted.key value" pairs.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    std::vector<std::string> args) {
  std::vector<std::pair<std::string, std::string>> overrides;
  // normalize the token order in case the parser handed them back reversed
  if (!args.empty() && args.front().rfind("--", 0) != 0 &&
      args.back().rfind("--", 0) == 0) {
    std::reverse(args.begin(), args.end());
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string key = args[i];
    if (key.rfind("--", 0) != 0 || key.find('.') == std::string::npos) {
      throw ConfigError("unrecognized argument '" + key +
                        "' (expected --section.key value)");
    }
    key = key.substr(2);
    if (i + 1 >= args.size()) {
      throw ConfigError("override '--" + key + "' is missing a value");
    }
    overrides.emplace_back(key, args[++i]);
  }
  return overrides;
}

RunConfig assemble_config(const CommonFlags& flags,
                          const std::vector<std::string>& extras) {
  std::string text = "{}";
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) {
      throw ConfigError("cannot open config file '" + flags.config_path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  auto overrides = parse_overrides(extras);
  if (flags.seed >= 0) {
    overrides.emplace_back("seed", std::to_string(flags.seed));
  }
  if (!flags.out_dir.empty()) {
    overrides.emplace_back("output_dir", "\"" + flags.out_dir + "\"");
  }
  if (flags.threads >= 0) {
    overrides.emplace_back("threads", std::to_string(flags.threads));
  }
  return parse_run_config(apply_config_overrides(text, overrides));
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_train(const CommonFlags& flags, const std::vector<std::string>& extras) {
  RunConfig cfg = assemble_config(flags, extras);
  if (!cfg.target) throw ConfigError("missing required key 'target'");
  if (cfg.train.iterations <= 0) {
    throw ConfigError("missing required key 'training.iterations'");
  }
  const fs::path out = prepare_out_dir(cfg);
  auto latent = gaussian_latent(cfg.latent_sigma, cfg.target->dim());

  const long report_every = std::max<long>(1, cfg.train.iterations / 50);
  auto progress = [&](long iter, double loss) {
    if (iter % report_every == 0 || iter + 1 == cfg.train.iterations) {
      std::cerr << "iteration " << iter << " / " << cfg.train.iterations
                << "  loss " << loss << "\n";
    }
  };
  const TrainResult result =
      train(cfg.target, latent, cfg.model, cfg.train, cfg.solver, progress);

  const fs::path ckpt = out / "checkpoint.bin";
  save_checkpoint(result.model, ckpt, cfg.seed, cfg.train.iterations);

  CsvWriter loss_csv((out / "loss.csv").string(), {"iteration", "loss"});
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    loss_csv.row({std::to_string(i), format_double(result.loss_trace[i])});
  }
  loss_csv.close();

  std::cout << "trained " << to_string(cfg.model.kind) << " on "
            << cfg.target->name() << " for " << cfg.train.iterations
            << " iterations; final loss "
            << format_double(result.loss_trace.back()) << "\n"
            << "checkpoint: " << ckpt.string() << "\n";
  return kExitOk;
}

int cmd_sample(const std::string& checkpoint_path, long n,
               const CommonFlags& flags, const std::vector<std::string>& extras) {
  RunConfig cfg = assemble_config(flags, extras);
  const fs::path out = prepare_out_dir(cfg);
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const FlowModel& model = loaded.model;

  Rng rng(cfg.seed);
  std::vector<std::string> header;
  for (int j = 1; j <= model.dim(); ++j) header.push_back("x_" + std::to_string(j));
  header.emplace_back("logq");
  header.emplace_back("logw");
  CsvWriter csv((out / "samples.csv").string(), header);

  if (n > 0) {
    const BatchSampleResult batch =
        sample_batch(model, n, cfg.solver, rng, cfg.threads);
    for (long i = 0; i < n; ++i) {
      std::vector<std::string> row;
      row.reserve(header.size());
      for (int j = 0; j < model.dim(); ++j) {
        row.push_back(format_double(batch.x(i, j)));
      }
      const double logq = batch.logq[i];
      const double logw = -model.target->energy(batch.x.row(i).transpose()) - logq;
      row.push_back(format_double(logq));
      row.push_back(format_double(logw));
      csv.row(row);
    }
    std::cout << "wrote " << n << " samples (resample rate "
              << format_double(batch.resample_rate) << ")\n";
  } else {
    std::cout << "wrote 0 samples\n";
  }
  csv.close();
  return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint_path, const CommonFlags& flags,
                 const std::vector<std::string>& extras) {
  RunConfig cfg = assemble_config(flags, extras);
  const fs::path out = prepare_out_dir(cfg);
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const FlowModel& model = loaded.model;

  const auto reports = evaluate_model(model, cfg.solver, cfg.eval, cfg.seed);

  std::ofstream json_out(out / "metrics.json");
  json_out << metrics_run_json(reports) << "\n";
  json_out.close();

  const auto* gauss = dynamic_cast<const GaussianEnergy*>(model.latent.get());
  const double sigma = gauss != nullptr ? gauss->sigma() : 0.0;
  CsvWriter csv((out / "metrics.csv").string(), metrics_csv_header());
  for (const auto& r : reports) {
    csv.row(metrics_csv_row(r, to_string(model.kind), model.target->name(), sigma));
  }
  csv.close();

  int failures = 0;
  for (const auto& r : reports) {
    if (!r.ok) ++failures;
  }
  std::cout << metrics_run_json(reports) << "\n";
  if (failures > 0) {
    std::cerr << failures << " of " << reports.size()
              << " evaluation repeats failed\n";
  }
  return kExitOk;
}

int cmd_teleport(std::vector<double> ms, std::vector<double> density_times,
                 int vnorm_points, const std::string& out_dir) {
  fs::path out(out_dir);
  fs::create_directories(out);

  CsvWriter density_csv((out / "teleport_density.csv").string(),
                        {"m", "t", "x", "rho"});
  CsvWriter vnorm_csv((out / "teleport_vnorm.csv").string(),
                      {"m", "t", "vnorm_sq"});

  // time grid for the velocity-norm curves: uniform early, geometric
  // clustering of 1 - t near the end, reported on [0.001, 0.999]
  std::vector<double> vnorm_times;
  const int half = std::max(2, vnorm_points / 2);
  for (int i = 0; i < half; ++i) {
    vnorm_times.push_back(0.001 + (0.9 - 0.001) * i / (half - 1));
  }
  for (int i = 0; i < half; ++i) {
    const double gap = 0.1 * std::pow(0.001 / 0.1, static_cast<double>(i + 1) /
                                                       half);
    vnorm_times.push_back(1.0 - gap);
  }

  for (double m : ms) {
    if (m < 0.0) throw ConfigError("teleport: m must be >= 0");
    const QuantilePath path(m);
    const std::vector<double> grid = density_grid(m);
    for (double t : density_times) {
      for (double x : grid) {
        density_csv.row({format_double(m), format_double(t), format_double(x),
                         format_double(path.density(t, x))});
      }
    }
    for (double t : vnorm_times) {
      vnorm_csv.row({format_double(m), format_double(t),
                     format_double(velocity_norm_sq(t, m))});
    }
  }
  density_csv.close();
  vnorm_csv.close();
  std::cout << "wrote " << (out / "teleport_density.csv").string() << " and "
            << (out / "teleport_vnorm.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural samplers for unnormalized densities via energy interpolation"};
  app.require_subcommand(1);

  CommonFlags train_flags, sample_flags, eval_flags;
  std::string checkpoint_path;
  std::string eval_checkpoint;
  long n_samples = 50000;
  long eval_n = -1;
  int eval_repeats = -1;

  CLI::App* train_cmd = app.add_subcommand("train", "fit an interpolation model");
  add_common(train_cmd, train_flags, true);

  CLI::App* sample_cmd =
      app.add_subcommand("sample", "draw samples and log weights from a checkpoint");
  sample_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")
      ->required();
  sample_cmd->add_option("--n", n_samples, "number of samples (default 50000)");
  add_common(sample_cmd, sample_flags, false);

  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "ESS / NLL / energy distance of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")
      ->required();
  eval_cmd->add_option("--n", eval_n, "samples per evaluation repeat");
  eval_cmd->add_option("--repeats", eval_repeats, "evaluation repeats (default 10)");
  add_common(eval_cmd, eval_flags, false);

  std::vector<double> teleport_m{1.0, 5.0, 15.0, 50.0};
  std::vector<double> density_times{0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0};
  int vnorm_points = 200;
  std::string teleport_out = ".";
  CLI::App* teleport_cmd = app.add_subcommand(
      "teleport", "density and velocity-norm curves of the two-mode family");
  teleport_cmd->add_option("--m", teleport_m, "mode offsets");
  teleport_cmd->add_option("--density-times", density_times,
                           "times for the density curves");
  teleport_cmd->add_option("--vnorm-points", vnorm_points,
                           "points on the velocity-norm curve");
  teleport_cmd->add_option("--out", teleport_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(train_flags, train_cmd->remaining());
    }
    if (sample_cmd->parsed()) {
      if (n_samples < 0) throw ConfigError("sample: --n must be >= 0");
      return cmd_sample(checkpoint_path, n_samples, sample_flags,
                        sample_cmd->remaining());
    }
    if (eval_cmd->parsed()) {
      std::vector<std::string> extras = eval_cmd->remaining();
      if (eval_n >= 0) {
        extras.push_back("--eval.n");
        extras.push_back(std::to_string(eval_n));
      }
      if (eval_repeats > 0) {
        extras.push_back("--eval.repeats");
        extras.push_back(std::to_string(eval_repeats));
      }
      return cmd_evaluate(eval_checkpoint, eval_flags, extras);
    }
    if (teleport_cmd->parsed()) {
      return cmd_teleport(teleport_m, density_times, vnorm_points, teleport_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

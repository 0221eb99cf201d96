#include "boltzcurve/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace bc {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& prefix,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.contains(key)) {
      throw ConfigError("unknown config key '" + prefix + key + "'");
    }
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, const std::string& prefix,
         T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + prefix + key + "' has the wrong type");
  }
}

TargetPtr parse_target(const json& t) {
  reject_unknown(t, "target.", {"name", "seed", "sigma", "dim", "means"});
  if (!t.contains("name")) {
    throw ConfigError("missing required key 'target.name'");
  }
  const std::string name = t.at("name").get<std::string>();
  if (name == "gmm40") {
    return gmm40(get_or<std::uint64_t>(t, "seed", "target.", 0));
  }
  if (name == "manywell") return manywell8();
  if (name == "gaussian") {
    if (!t.contains("sigma") || !t.contains("dim")) {
      throw ConfigError("gaussian target requires 'target.sigma' and 'target.dim'");
    }
    return gaussian_latent(t.at("sigma").get<double>(), t.at("dim").get<int>());
  }
  throw ConfigError("unknown target name '" + name + "'");
}

SolverConfig parse_solver(const json& s) {
  reject_unknown(s, "solver.",
                 {"method", "rtol", "atol", "max_steps", "euler_steps",
                  "nan_policy"});
  SolverConfig cfg;
  const std::string method = get_or<std::string>(s, "method", "solver.", "dopri5");
  if (method == "dopri5") {
    cfg.method = SolverConfig::Method::dopri5;
  } else if (method == "euler") {
    cfg.method = SolverConfig::Method::euler;
  } else {
    throw ConfigError("config key 'solver.method' must be dopri5 or euler");
  }
  cfg.rtol = get_or<double>(s, "rtol", "solver.", cfg.rtol);
  cfg.atol = get_or<double>(s, "atol", "solver.", cfg.atol);
  cfg.max_steps = get_or<long>(s, "max_steps", "solver.", cfg.max_steps);
  cfg.euler_steps = get_or<int>(s, "euler_steps", "solver.", cfg.euler_steps);
  if (cfg.rtol <= 0.0 || cfg.atol <= 0.0) {
    throw ConfigError("solver tolerances must be positive");
  }
  if (cfg.euler_steps < 1) {
    throw ConfigError("config key 'solver.euler_steps' must be >= 1");
  }
  const std::string nan_policy =
      get_or<std::string>(s, "nan_policy", "solver.", "error");
  if (nan_policy == "error") {
    cfg.nan_policy = SolverConfig::NanPolicy::error;
  } else if (nan_policy == "resample") {
    cfg.nan_policy = SolverConfig::NanPolicy::resample;
  } else {
    throw ConfigError("config key 'solver.nan_policy' must be error or resample");
  }
  return cfg;
}

ModelConfig parse_model(const json& m) {
  reject_unknown(m, "interpolation.",
                 {"kind", "beta_min", "beta_max", "use_ct", "psi_hidden",
                  "v_hidden", "c_hidden", "g_hidden"});
  ModelConfig cfg;
  const std::string kind =
      get_or<std::string>(m, "kind", "interpolation.", "gradflow");
  cfg.kind = interp_kind_from_string(kind);
  cfg.beta_min = get_or<double>(m, "beta_min", "interpolation.", cfg.beta_min);
  cfg.beta_max = get_or<double>(m, "beta_max", "interpolation.", cfg.beta_max);
  cfg.use_ct = get_or<bool>(m, "use_ct", "interpolation.", cfg.use_ct);
  cfg.psi_hidden = get_or<std::vector<int>>(m, "psi_hidden", "interpolation.",
                                            cfg.psi_hidden);
  cfg.v_hidden =
      get_or<std::vector<int>>(m, "v_hidden", "interpolation.", cfg.v_hidden);
  cfg.c_hidden =
      get_or<std::vector<int>>(m, "c_hidden", "interpolation.", cfg.c_hidden);
  cfg.g_hidden =
      get_or<std::vector<int>>(m, "g_hidden", "interpolation.", cfg.g_hidden);
  if (cfg.beta_min <= 0.0 || cfg.beta_max <= cfg.beta_min) {
    throw ConfigError("interpolation schedule requires 0 < beta_min < beta_max");
  }
  return cfg;
}

TrainConfig parse_train(const json& t) {
  reject_unknown(t, "training.",
                 {"iterations", "batch_size", "time_steps", "particles",
                  "learning_rate", "lr_final", "refresh_interval"});
  TrainConfig cfg;
  cfg.iterations = get_or<long>(t, "iterations", "training.", cfg.iterations);
  cfg.batch_size = get_or<int>(t, "batch_size", "training.", cfg.batch_size);
  cfg.time_steps = get_or<int>(t, "time_steps", "training.", cfg.time_steps);
  cfg.particles = get_or<int>(t, "particles", "training.", cfg.particles);
  cfg.learning_rate =
      get_or<double>(t, "learning_rate", "training.", cfg.learning_rate);
  cfg.lr_final = get_or<double>(t, "lr_final", "training.", cfg.lr_final);
  cfg.refresh_interval =
      get_or<int>(t, "refresh_interval", "training.", cfg.refresh_interval);
  if (cfg.batch_size <= 0 || cfg.time_steps <= 1 || cfg.particles <= 0) {
    throw ConfigError("training counts must be positive");
  }
  if (cfg.learning_rate <= 0.0) {
    throw ConfigError("config key 'training.learning_rate' must be positive");
  }
  return cfg;
}

EvalOptions parse_eval(const json& e) {
  reject_unknown(e, "eval.", {"n", "repeats", "ed_max_points"});
  EvalOptions opts;
  opts.n = get_or<long>(e, "n", "eval.", opts.n);
  opts.repeats = get_or<int>(e, "repeats", "eval.", opts.repeats);
  opts.ed_max_points =
      get_or<long>(e, "ed_max_points", "eval.", opts.ed_max_points);
  if (opts.n < 0 || opts.repeats < 1) {
    throw ConfigError("eval requires n >= 0 and repeats >= 1");
  }
  return opts;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(root, "",
                 {"seed", "output_dir", "threads", "target", "latent",
                  "interpolation", "training", "solver", "eval"});
  if (!root.contains("seed")) {
    throw ConfigError("missing required key 'seed'");
  }

  RunConfig cfg;
  try {
    cfg.seed = root.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw ConfigError("config key 'seed' must be an unsigned integer");
  }
  cfg.output_dir = get_or<std::string>(root, "output_dir", "", cfg.output_dir);
  cfg.threads = get_or<int>(root, "threads", "", cfg.threads);
  if (root.contains("target")) cfg.target = parse_target(root.at("target"));
  if (root.contains("latent")) {
    reject_unknown(root.at("latent"), "latent.", {"sigma"});
    cfg.latent_sigma =
        get_or<double>(root.at("latent"), "sigma", "latent.", cfg.latent_sigma);
    if (cfg.latent_sigma <= 0.0) {
      throw ConfigError("config key 'latent.sigma' must be positive");
    }
  }
  if (root.contains("interpolation")) {
    cfg.model = parse_model(root.at("interpolation"));
  }
  if (root.contains("training")) cfg.train = parse_train(root.at("training"));
  if (root.contains("solver")) cfg.solver = parse_solver(root.at("solver"));
  if (root.contains("eval")) cfg.eval = parse_eval(root.at("eval"));

  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  cfg.eval.threads = cfg.threads;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string apply_config_overrides(
    const std::string& json_text,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  for (const auto& [path, raw] : overrides) {
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // plain string
    }
    json* node = &root;
    std::string part;
    std::stringstream ss(path);
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("empty override key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
  }
  return root.dump();
}

}  // namespace bc

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "boltzcurve/metrics.hpp"
#include "boltzcurve/training.hpp"

namespace bc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One declarative run description. Unknown keys are rejected with the full
/// dotted path; the seed is mandatory.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  int threads = 0;
  TargetPtr target;  // null when the config has no target section
  double latent_sigma = 1.0;
  ModelConfig model;
  TrainConfig train;
  SolverConfig solver;
  EvalOptions eval;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Applies dotted-path overrides ("training.iterations" -> "500") onto the
/// JSON text before parsing. Values parse as JSON scalars/arrays when
/// possible, else as strings.
std::string apply_config_overrides(
    const std::string& json_text,
    const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace bc

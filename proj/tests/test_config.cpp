#include <string>

#include "boltzcurve/run_config.hpp"
#include "doctest.h"

using namespace bc;

namespace {

const char* kValid = R"({
  "seed": 7,
  "output_dir": "out",
  "threads": 2,
  "target": {"name": "gmm40", "seed": 0},
  "latent": {"sigma": 1.0},
  "interpolation": {"kind": "gradflow", "beta_min": 0.1, "beta_max": 20.0,
                    "psi_hidden": [16, 16], "use_ct": true},
  "training": {"iterations": 100, "particles": 128, "learning_rate": 0.001},
  "solver": {"method": "dopri5", "rtol": 1e-5, "atol": 1e-5},
  "eval": {"n": 500, "repeats": 3}
})";

}  // namespace

TEST_SUITE_BEGIN("config");

TEST_CASE("a full config parses into the right pieces") {
  const RunConfig cfg = parse_run_config(kValid);
  CHECK(cfg.seed == 7);
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.threads == 2);
  REQUIRE(cfg.target != nullptr);
  CHECK(cfg.target->name() == "gmm40");
  CHECK(cfg.target->dim() == 2);
  CHECK(cfg.latent_sigma == 1.0);
  CHECK(cfg.model.kind == InterpKind::gradflow);
  CHECK(cfg.model.psi_hidden == std::vector<int>{16, 16});
  CHECK(cfg.train.iterations == 100);
  CHECK(cfg.train.particles == 128);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.train.threads == 2);
  CHECK(cfg.solver.method == SolverConfig::Method::dopri5);
  CHECK(cfg.eval.n == 500);
  CHECK(cfg.eval.repeats == 3);
}

TEST_CASE("seed is mandatory") {
  try {
    parse_run_config(R"({"output_dir": "x"})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with their dotted path") {
  try {
    parse_run_config(R"({"seed": 1, "training": {"iterationz": 5}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("training.iterationz") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config(R"({"seed": 1, "bogus": 2})"), ConfigError);
}

TEST_CASE("a target without a name is rejected") {
  try {
    parse_run_config(R"({"seed": 1, "target": {"seed": 3}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("target.name") != std::string::npos);
  }
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS_AS(parse_run_config(R"({"seed": 1, "latent": {"sigma": -1}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"seed": 1, "solver": {"method": "rk4"}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"seed": 1, "solver": {"rtol": 0.0}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"seed": 1, "training": {"learning_rate": -0.1}})"),
      ConfigError);
  CHECK_THROWS_AS(parse_run_config("not json at all"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"seed": "seven"})"), ConfigError);
}

TEST_CASE("dotted overrides rewrite scalars and create missing sections") {
  std::string text = R"({"seed": 1})";
  text = apply_config_overrides(
      text, {{"training.iterations", "250"},
             {"target.name", "manywell"},
             {"solver.nan_policy", "resample"},
             {"interpolation.psi_hidden", "[8,8]"}});
  const RunConfig cfg = parse_run_config(text);
  CHECK(cfg.train.iterations == 250);
  CHECK(cfg.target->name() == "manywell");
  CHECK(cfg.solver.nan_policy == SolverConfig::NanPolicy::resample);
  CHECK(cfg.model.psi_hidden == std::vector<int>{8, 8});
}

TEST_CASE("gaussian target requires sigma and dim") {
  CHECK_THROWS_AS(
      parse_run_config(R"({"seed": 1, "target": {"name": "gaussian"}})"),
      ConfigError);
  const RunConfig cfg = parse_run_config(
      R"({"seed": 1, "target": {"name": "gaussian", "sigma": 2.0, "dim": 3}})");
  CHECK(cfg.target->dim() == 3);
}

TEST_SUITE_END();

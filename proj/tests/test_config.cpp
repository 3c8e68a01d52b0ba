#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "mfg/config.hpp"

using namespace mfg;

namespace {

std::string minimal(const std::string& extra = "") {
  return R"({"seed": 7)" + extra + "}";
}

}  // namespace

TEST_CASE("a seed alone yields the full default experiment") {
  const auto c = parse_config_text(minimal());
  CHECK(c.seed == 7);
  CHECK(c.model.sigma == doctest::Approx(1.0));
  CHECK(c.model.sigma_tilde == doctest::Approx(0.0));
  CHECK(c.model.horizon == doctest::Approx(1.0));
  CHECK(c.model.cost.family() == "mean_square_distance");
  CHECK(c.steps == 100);
  CHECK(c.n_common == 64);
  CHECK(c.n_particles == 2000);
  CHECK(c.basis_names == std::vector<std::string>{"1", "x", "mbar"});
  CHECK(c.ridge == doctest::Approx(1e-8));
  CHECK(c.solver.damping == doctest::Approx(0.5));
  CHECK(c.solver.tol == doctest::Approx(1e-4));
  CHECK(c.solver.inner_tol == doctest::Approx(2.5e-5));
  CHECK(c.initial_control_level == doctest::Approx(0.0));
  CHECK(c.diagnostics.suites == known_suites());
  CHECK(c.diagnostics.assumption_trials == 10000);
  CHECK(c.output_dir == "out");
}

TEST_CASE("the seed is mandatory and must be a nonnegative integer") {
  CHECK_THROWS_WITH_AS(parse_config_text("{}"), doctest::Contains("seed"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": -3})"),
                       doctest::Contains("nonnegative"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": 1.5})"), doctest::Contains("seed"),
                       ConfigError);
}

TEST_CASE("steps default scales with the horizon") {
  const auto c = parse_config_text(R"({"seed": 1, "model": {"horizon": 0.5}})");
  CHECK(c.steps == 50);
  const auto d = parse_config_text(
      R"({"seed": 1, "model": {"horizon": 0.5}, "discretization": {"steps": 17}})");
  CHECK(d.steps == 17);
}

TEST_CASE("inner tolerance defaults to a quarter of the outer one") {
  const auto c = parse_config_text(R"({"seed": 1, "solver": {"tol": 0.01}})");
  CHECK(c.solver.tol == doctest::Approx(0.01));
  CHECK(c.solver.inner_tol == doctest::Approx(0.0025));
  const auto d =
      parse_config_text(R"({"seed": 1, "solver": {"tol": 0.01, "inner_tol": 0.001}})");
  CHECK(d.solver.inner_tol == doctest::Approx(0.001));
}

TEST_CASE("model fields are range-checked with their full key names") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": 1, "model": {"sigma_tilde": -1}})"),
                       doctest::Contains("model.sigma_tilde"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": 1, "model": {"sigma": 0}})"),
                       doctest::Contains("model.sigma"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": 1, "model": {"horizon": -2}})"),
                       doctest::Contains("model.horizon"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"seed": 1, "discretization": {"n_particles": 0}})"),
      doctest::Contains("n_particles"), ConfigError);
}

TEST_CASE("unknown keys are rejected with a spelling suggestion") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": 1, "model": {"sigma_tilda": 0.5}})"),
                       doctest::Contains("did you mean \"sigma_tilde\""), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": 1, "banana": 3})"),
                       doctest::Contains("banana"), ConfigError);
}

TEST_CASE("cost families parse with their parameters") {
  const auto tm = parse_config_text(
      R"({"seed": 1, "model": {"cost": {"family": "track_mean", "q": 2, "q_bar": 3, "s": 0.5}}})");
  CHECK(tm.model.cost.family() == "track_mean");
  CHECK(tm.cost_spec.q == doctest::Approx(2.0));
  CHECK(tm.cost_spec.q_bar == doctest::Approx(3.0));
  CHECK(tm.cost_spec.s == doctest::Approx(0.5));

  const auto quad = parse_config_text(
      R"({"seed": 1, "model": {"cost": {"family": "quadratic", "a": 0.5,
          "psi": {"type": "tanh", "scale": 0.7}}}})");
  CHECK(quad.model.cost.family() == "quadratic");
  CHECK(quad.cost_spec.psi_type == "tanh");
  CHECK(quad.cost_spec.psi_param == doctest::Approx(0.7));

  const auto sq = parse_config_text(
      R"({"seed": 1, "model": {"cost": {"family": "state_quadratic", "a": 2.0}}})");
  CHECK(sq.model.cost.family() == "state_quadratic");

  // Family-inapplicable keys are rejected.
  CHECK_THROWS_AS(parse_config_text(
                      R"({"seed": 1, "model": {"cost": {"family": "track_mean", "a": 1}}})"),
                  ConfigError);
  // Invalid parameter combinations surface as config errors with the key.
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"seed": 1, "model": {"cost": {"family": "quadratic", "a": -1}}})"),
      doctest::Contains("model.cost"), ConfigError);
}

TEST_CASE("initial distribution shapes") {
  const auto g = parse_config_text(
      R"({"seed": 1, "model": {"initial": {"type": "gaussian", "mean": 2, "stddev": 0.5}}})");
  CHECK(g.model.initial.kind == InitialDistribution::Kind::gaussian);
  CHECK(g.model.initial.a == doctest::Approx(2.0));
  CHECK(g.model.initial.b == doctest::Approx(0.5));

  const auto u = parse_config_text(
      R"({"seed": 1, "model": {"initial": {"type": "uniform", "lo": -1, "hi": 1}}})");
  CHECK(u.model.initial.kind == InitialDistribution::Kind::uniform);

  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"seed": 1, "model": {"initial": {"type": "dirac", "stddev": 1}}})"),
      doctest::Contains("stddev"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text(
          R"({"seed": 1, "model": {"initial": {"type": "uniform", "lo": 1, "hi": -1}}})"),
      doctest::Contains("hi"), ConfigError);
}

TEST_CASE("basis names feed the solver's regression") {
  const auto c = parse_config_text(
      R"({"seed": 1, "discretization": {"basis": ["1", "x", "mbar", "x_mbar"], "ridge": 1e-6}})");
  CHECK(c.basis_names.size() == 4);
  CHECK(c.solver.regression.basis.size() == 4);
  CHECK(c.solver.regression.ridge_scale == doctest::Approx(1e-6));
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"seed": 1, "discretization": {"basis": ["1", "y"]}})"),
      doctest::Contains("unknown feature"), ConfigError);
}

TEST_CASE("diagnostic suites are validated against the known set") {
  const auto c = parse_config_text(
      R"({"seed": 1, "diagnostics": {"suites": ["assumptions", "optimality"]}})");
  CHECK(c.diagnostics.suites == std::vector<std::string>{"assumptions", "optimality"});
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"seed": 1, "diagnostics": {"suites": ["optimalty"]}})"),
      doctest::Contains("did you mean \"optimality\""), ConfigError);
}

TEST_CASE("echoed configuration is a fixed point of the parser") {
  const std::string text = R"({
    "seed": 99,
    "model": {
      "sigma": 0.7, "sigma_tilde": 0.2, "horizon": 0.5,
      "cost": {"family": "track_mean", "q": 1, "q_bar": 2, "s": 1},
      "initial": {"type": "gaussian", "mean": 0.5, "stddev": 1.5}
    },
    "discretization": {"steps": 40, "n_common": 16, "n_particles": 500},
    "solver": {"damping": 0.4, "tol": 2e-4},
    "diagnostics": {"suites": ["reduction"], "smp_perturbations": 5},
    "output_dir": "results"
  })";
  const auto c = parse_config_text(text);
  const std::string once = echo_config(c);
  const auto reparsed = parse_config_text(once);
  const std::string twice = echo_config(reparsed);
  CHECK(once == twice);
  CHECK(reparsed.seed == 99);
  CHECK(reparsed.solver.damping == doctest::Approx(0.4));
  CHECK(reparsed.diagnostics.smp_perturbations == 5);
  CHECK(reparsed.output_dir == "results");
  // Defaults filled by the first parse survive the round trip explicitly.
  CHECK(once.find("inner_tol") != std::string::npos);
  CHECK(once.find("assumption_trials") != std::string::npos);
}

TEST_CASE("malformed json is reported as a config error") {
  CHECK_THROWS_AS(parse_config_text("{"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(""), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[1, 2]"), ConfigError);
}

TEST_CASE("missing files are reported with the path") {
  CHECK_THROWS_WITH_AS(load_config("/nonexistent/cfg.json"),
                       doctest::Contains("/nonexistent/cfg.json"), ConfigError);
}

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfg/solver.hpp"

namespace mfg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DiagnosticsConfig {
  std::vector<std::string> suites;  // subset of the known suite names
  std::int64_t assumption_trials = 10000;
  int smp_perturbations = 20;
  double smp_amplitude = 0.2;
};

const std::vector<std::string>& known_suites();

/// Raw cost parameters as they appeared in the config, kept so the echoed
/// configuration can reproduce them without reverse-engineering the cost.
struct CostSpec {
  std::string family = "mean_square_distance";
  double a = 1.0;  // quadratic and state_quadratic families
  std::string psi_type = "linear";
  double psi_param = 1.0;  // slope (linear) or scale (tanh)
  double q = 1.0;
  double q_bar = 1.0;
  double s = 1.0;
};

/// A full experiment: model, discretization, solver knobs, diagnostics, seed.
/// Parsing is strict: unknown keys are errors (with a spelling suggestion),
/// wrong types and out-of-range values name the offending key.
struct ExperimentConfig {
  MfgModel model;
  CostSpec cost_spec;
  int steps = 100;
  int n_common = 64;
  int n_particles = 2000;
  std::vector<std::string> basis_names = {"1", "x", "mbar"};
  double ridge = 1e-8;
  SolverOptions solver;  // regression basis and ridge mirrored from the fields above
  double initial_control_level = 0.0;
  DiagnosticsConfig diagnostics;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// The configuration echoed back with every default filled in, serialized
/// with a fixed key order (the solve artifacts must be byte-stable).
std::string echo_config(const ExperimentConfig& c);

}  // namespace mfg

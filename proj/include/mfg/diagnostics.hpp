#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfg/costs.hpp"
#include "mfg/paths.hpp"
#include "mfg/solver.hpp"

namespace mfg {

/// Monte Carlo estimate of a feedback's total cost against a frozen
/// population flow: quadratic running effort plus the terminal cost against
/// the flow's terminal clouds. The player deviates alone; the population
/// stays on the flow, and the feedback's features read the frozen moments.
struct CostReport {
  double value = 0.0;
  double std_error = 0.0;  // sample standard error across all paths
  int n = 0;
};

CostReport evaluate_cost(const ControlField& control, const MfgModel& model,
                         const ConditionalFlow& flow, std::span<const double> init,
                         const NoiseEnsemble& noise);

struct SmpReport {
  std::vector<double> gaps;        // per candidate: mean cost increase over the solution
  double min_gap = 0.0;
  double min_gap_std_error = 0.0;  // scenario-cluster stderr at the argmin
  int argmin = -1;
  double base_value = 0.0;
};

/// Optimality probe: shift the solved feedback by random constant coefficient
/// perturbations and price each candidate against the frozen equilibrium
/// flow, every candidate riding its own paths on shared noise. A feedback
/// satisfying the optimality principle keeps all gaps nonnegative up to
/// sampling error.
SmpReport smp_gap(const MfgSolution& sol, const MfgModel& model, int n_perturbations,
                  double amplitude, std::uint64_t seed);

struct ExploitabilityReport {
  double value = 0.0;      // J(solution) - J(best response), both against the frozen flow
  double std_error = 0.0;  // scenario-cluster stderr of the pathwise difference
  double j_control = 0.0;
  double j_best = 0.0;
  int br_iterations = 0;
  bool br_converged = false;
};

/// How much a single player gains by re-solving the control problem against
/// the flow the solution realized. Near an equilibrium this is zero up to
/// regression and sampling error.
ExploitabilityReport exploitability(const MfgSolution& sol, const MfgModel& model,
                                    const SolverOptions& opts);

/// Closed-form benchmark for terminal costs whose gradient is affine with
/// measure dependence through the mean only: gx = a_T x + (c_T - a_T) mbar.
/// The adjoint stays affine, Y_t = a(t) x + b(t) mbar, and the slopes solve
/// scalar Riccati equations with explicit solutions.
struct LqOracle {
  double a_T = 0.0;
  double c_T = 0.0;
  double horizon = 1.0;

  static LqOracle track_mean(double q, double q_bar, double s, double horizon);
  static LqOracle state_quadratic(double a, double horizon);
  static LqOracle mean_square_distance(double horizon);

  double a(double t) const;
  double c(double t) const;
  double b(double t) const { return c(t) - a(t); }

  /// The equilibrium feedback alpha = -(a(t) x + b(t) mbar) on a grid; the
  /// basis must contain the x and mbar features.
  ControlField control_field(const TimeGrid& grid, const FeatureBasis& basis) const;
};

/// Per-node agreement between each scenario cloud and the pooled cloud,
/// against the sampling scale sigma / sqrt(n_particles). Large ratios mean
/// the scenario clouds carry structure the pooled cloud misses (or the other
/// way around); with no common noise they should agree to sampling error.
struct ReductionReport {
  std::vector<double> mean_w2;       // per node: mean over scenarios of W2(cloud, pooled)
  std::vector<double> pooled_sigma;  // per node: pooled standard deviation
  double worst_ratio = 0.0;          // max over nodes of mean_w2 / (sigma / sqrt(n_particles))
};

ReductionReport reduction_check(const PathEnsemble& paths);

struct AssumptionSuite {
  std::vector<AssumptionReport> reports;
  bool core_passed = false;  // the four structural conditions, monotonicity included
};

AssumptionSuite run_assumption_checks(const TerminalCost& cost, std::int64_t trials,
                                      std::uint64_t seed, bool include_lasry_lions);

}  // namespace mfg

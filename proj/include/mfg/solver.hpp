#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mfg/costs.hpp"
#include "mfg/fbsde.hpp"
#include "mfg/paths.hpp"

namespace mfg {

struct MfgModel {
  double sigma = 1.0;        // idiosyncratic volatility, > 0
  double sigma_tilde = 0.0;  // common volatility, >= 0
  double horizon = 1.0;
  TerminalCost cost = TerminalCost::mean_square_distance();
  InitialDistribution initial = InitialDistribution::dirac(0.0);
};

void validate_model(const MfgModel& model);

/// Path norm of a feedback along an ensemble: root of the time integral of
/// the mean squared control value, averaged over scenarios. The distance is
/// the norm of the difference, both feedbacks riding the same paths.
double h2_distance(const ControlField& a, const ControlField& b, const PathEnsemble& paths);
double h2_norm(const ControlField& a, const PathEnsemble& paths);

/// Affine-in-features snapshot of the adjoint at a fixed time, used to hand a
/// terminal condition from one interval to the interval before it.
struct DecouplingField {
  double time = 0.0;
  FeatureBasis basis = FeatureBasis::standard();
  std::vector<double> coeffs;
  double r2 = 0.0;    // fit quality of the node regression behind the row
  double lip_x = 0.0; // max |d/dx| over the fitting ensemble
  double lip_m = 0.0; // max |d/dmbar| over the fitting ensemble
};

/// Interval terminal condition: the model's terminal cost on the last
/// interval, the next interval's decoupling field elsewhere.
using TerminalSpec = std::variant<TerminalCost, DecouplingField>;

struct SolverOptions {
  double damping = 0.5;
  double tol = 1e-4;
  int max_iter = 200;
  double inner_damping = 0.5;
  double inner_tol = 2.5e-5;
  int inner_max_iter = 200;
  double split_ratio_threshold = 0.9;
  int split_ratio_window = 5;
  RegressionBasis regression;
};

struct PhiResult {
  ControlField control;    // best response to the flow realized by the input
  PathEnsemble reference;  // ensemble under the input feedback (the frozen flow)
  InnerResult inner;
};

/// The fixed-point map: realize the population flow under `alpha`, freeze it
/// into the terminal condition, solve the single-player problem against it.
PhiResult phi_map(const ControlField& alpha, std::span<const double> init,
                  const NoiseEnsemble& noise, const MfgModel& model,
                  const TerminalSpec& terminal, const InnerOptions& inner_opts,
                  int node_offset = 0);

struct ContractionRecord {
  int iteration = 0;
  double distance = 0.0;  // relative step size of the damped update
  double ratio = 0.0;     // distance / previous distance (nan on the first step)
};

struct IntervalResult {
  enum class Status { converged, split_max_iter, split_ratio };
  Status status = Status::converged;
  ControlField control;
  PathEnsemble paths;  // reference ensemble under the final feedback
  std::vector<ContractionRecord> history;
  DecouplingField field;   // adjoint snapshot at the interval start (converged only)
  std::vector<double> r2;  // per node, from the final inner solve
  int iterations = 0;
  double residual = 0.0;
};

/// Damped Picard iteration on the fixed-point map over one interval. Reports
/// a split instead of converging when the iteration budget runs out or the
/// step ratios sit above the threshold for a full window.
IntervalResult solve_interval(const ControlField& start, std::span<const double> init,
                              const NoiseEnsemble& noise, const MfgModel& model,
                              const TerminalSpec& terminal, const SolverOptions& opts,
                              int node_offset = 0);

struct IntervalRecord {
  int first_node = 0;
  int last_node = 0;
  bool forward = false;  // false: backward continuation, true: consistency sweep
  IntervalResult::Status status = IntervalResult::Status::converged;
  int iterations = 0;
  double residual = 0.0;
  std::vector<ContractionRecord> history;
  DecouplingField field;
};

struct MfgSolution {
  ControlField control;  // assembled over the full grid
  PathEnsemble paths;    // final propagation under the assembled control
  ConditionalFlow flow;
  std::vector<IntervalRecord> intervals;  // every attempt, splits included
  bool converged = false;
  int total_iterations = 0;
  std::uint64_t seed = 0;
};

/// Full solve: backward continuation from the horizon (halving intervals that
/// refuse to contract, handing terminals left through decoupling fields),
/// then a left-to-right consistency sweep on the realized initial clouds, and
/// a final propagation of the assembled feedback.
MfgSolution solve_mfg(const MfgModel& model, int steps, int n_common, int n_particles,
                      std::uint64_t seed, const SolverOptions& opts,
                      const std::optional<ControlField>& initial_control = std::nullopt);

struct UniquenessProbe {
  std::vector<double> starts;    // constant feedback levels used as seeds
  std::vector<double> pairwise;  // relative distances, pairs (i, j) with i < j
  double max_relative = 0.0;
  bool all_converged = false;
};

/// Solves from several constant initial feedbacks and compares the resulting
/// equilibria along one shared ensemble; far-apart limits flag multiplicity.
UniquenessProbe uniqueness_probe(const MfgModel& model, int steps, int n_common,
                                 int n_particles, std::uint64_t seed, const SolverOptions& opts,
                                 std::vector<double> starts = {0.0, 1.0, -1.0});

}  // namespace mfg

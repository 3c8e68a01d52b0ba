#pragma once

#include <span>
#include <vector>

#include "mfg/conditional.hpp"
#include "mfg/costs.hpp"
#include "mfg/measures.hpp"
#include "mfg/paths.hpp"

namespace mfg {

/// Terminal condition for the adjoint variable with all population data
/// frozen per scenario: either the gradient of a terminal cost against fixed
/// terminal clouds, or an affine-in-features row of a decoupling field
/// against fixed terminal moments. Freezing is what makes the inner problem
/// a single-player one.
class FrozenTerminal {
 public:
  static FrozenTerminal from_cost(const TerminalCost& cost,
                                  const std::vector<EmpiricalMeasure>& clouds);
  static FrozenTerminal from_coefficients(FeatureBasis basis, std::vector<double> coeffs,
                                          std::vector<double> mbar, std::vector<double> m2);

  int n_common() const { return n_common_; }
  double eval(int scenario, double x) const;

  /// Adjoint terminal values at the ensemble's last node, flat
  /// [scenario][particle].
  std::vector<double> eval_terminal(const PathEnsemble& paths) const;

 private:
  enum class Mode { affine, general, coefficients };
  FrozenTerminal() = default;

  Mode mode_ = Mode::affine;
  int n_common_ = 0;
  // affine: per-scenario slope/offset. coefficients: shared rows + moments.
  std::vector<double> slope_;
  std::vector<double> offset_;
  // general: gradient evaluated against the frozen clouds.
  std::vector<EmpiricalMeasure> clouds_;
  TerminalCost cost_ = TerminalCost::mean_square_distance();
  // coefficients: basis row at the interval end plus frozen moments.
  FeatureBasis basis_ = FeatureBasis::standard();
  std::vector<double> coeffs_;
  std::vector<double> mbar_;
  std::vector<double> m2_;
};

/// Adjoint terminal values for a cost against the ensemble's own terminal
/// clouds (no freezing indirection; test and diagnostic entry point).
std::vector<double> terminal_adjoint(const TerminalCost& cost, const PathEnsemble& paths);

struct InnerOptions {
  double damping = 0.5;
  double tol = 1e-4;
  int max_iter = 200;
  RegressionBasis regression;
};

struct InnerResult {
  ControlField control;
  PathEnsemble paths;      // propagation under the returned control
  std::vector<double> r2;  // per node, from the final update's regressions
  int iterations = 0;
  double residual = 0.0;   // relative step size of the last damped update
  bool converged = false;
  // The iterates ran away (state scale beyond any meaningful regression).
  // The control holds the last damped iterate, residual is infinite, and
  // paths may be empty; callers should treat the interval as too long.
  bool diverged = false;
};

/// Damped Picard iteration for the single-player problem with a frozen
/// terminal: propagate under the current feedback, regress the terminal
/// adjoint on each node's features (the adjoint is a martingale, so one
/// regression per node replaces a backward sweep), blend the negated fit
/// into the feedback, stop when the relative step is within tol. Iterates
/// that run off to unphysical state scales stop early with diverged set
/// instead of feeding a degenerate ensemble to the regressions.
InnerResult solve_inner(const ControlField& start, std::span<const double> init,
                        const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                        const FrozenTerminal& terminal, const InnerOptions& opts,
                        int node_offset = 0);

/// Relative size of one damped update step from the given feedback; a fixed
/// point of the inner iteration makes this small.
double fbsde_residual(const ControlField& control, std::span<const double> init,
                      const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                      const FrozenTerminal& terminal, const InnerOptions& opts,
                      int node_offset = 0);

}  // namespace mfg

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfg/features.hpp"
#include "mfg/measures.hpp"

namespace mfg {

/// Uniform time grid on [t0, t1] with `steps` Euler steps (steps+1 nodes).
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double t0_, double t1_, int steps_);
  double dt() const { return (t1 - t0) / steps; }
  double time(int k) const { return t0 + dt() * k; }
  int nodes() const { return steps + 1; }
  bool operator==(const TimeGrid&) const = default;
};

struct InitialDistribution {
  enum class Kind { dirac, gaussian, uniform };
  Kind kind = Kind::dirac;
  double a = 0.0;  // dirac: value; gaussian: mean; uniform: lower
  double b = 0.0;  // gaussian: stddev; uniform: upper

  static InitialDistribution dirac(double x);
  static InitialDistribution gaussian(double mean, double stddev);
  static InitialDistribution uniform(double lo, double hi);
};

/// Brownian increments for every scenario: one common path per scenario
/// shared by its particles, plus idiosyncratic paths per particle. Draws are
/// counter-based, so the common increments do not depend on the particle
/// count and any sub-range can be regenerated bit-identically.
struct NoiseEnsemble {
  TimeGrid grid;
  int n_common = 0;
  int n_particles = 0;
  std::uint64_t seed = 0;
  std::vector<double> dw;        // [scenario][step][particle]
  std::vector<double> dw_tilde;  // [scenario][step]

  double idio(int s, int k, int j) const {
    return dw[(static_cast<std::size_t>(s) * grid.steps + k) * n_particles + j];
  }
  double common(int s, int k) const {
    return dw_tilde[static_cast<std::size_t>(s) * grid.steps + k];
  }
};

NoiseEnsemble sample_noise(const TimeGrid& grid, int n_common, int n_particles,
                           std::uint64_t seed);

/// Initial states, flat [scenario][particle].
std::vector<double> sample_initial(const InitialDistribution& dist, int n_common,
                                   int n_particles, std::uint64_t seed);

/// Feedback control: one coefficient row per time node over a feature basis;
/// the value at (t_k, x, mbar, m2) is the row combined with the features.
struct ControlField {
  TimeGrid grid;
  FeatureBasis basis;
  std::vector<double> coeffs;  // nodes() x basis.size(), row-major

  ControlField() : ControlField(TimeGrid{}, FeatureBasis::standard()) {}
  ControlField(const TimeGrid& g, FeatureBasis b);
  static ControlField constant(const TimeGrid& g, FeatureBasis b, double value);

  std::span<double> row(int k) {
    return {coeffs.data() + static_cast<std::size_t>(k) * basis.size(), basis.size()};
  }
  std::span<const double> row(int k) const {
    return {coeffs.data() + static_cast<std::size_t>(k) * basis.size(), basis.size()};
  }
  double eval(int k, double x, double mbar, double m2) const {
    return basis.combine(row(k), x, mbar, m2);
  }
};

/// current + damping * (update - current), row by row.
ControlField blend(const ControlField& current, const ControlField& update, double damping);

/// Simulated states [scenario][node][particle] with the running conditional
/// moments of every scenario cloud.
struct PathEnsemble {
  TimeGrid grid;
  int n_common = 0;
  int n_particles = 0;
  std::vector<double> x;     // [scenario][node][particle]
  std::vector<double> mbar;  // [scenario][node]
  std::vector<double> m2;    // [scenario][node]

  std::span<const double> states(int s, int k) const {
    return {x.data() + (static_cast<std::size_t>(s) * grid.nodes() + k) * n_particles,
            static_cast<std::size_t>(n_particles)};
  }
  std::span<double> states(int s, int k) {
    return {x.data() + (static_cast<std::size_t>(s) * grid.nodes() + k) * n_particles,
            static_cast<std::size_t>(n_particles)};
  }
  double mean(int s, int k) const {
    return mbar[static_cast<std::size_t>(s) * grid.nodes() + k];
  }
  double second(int s, int k) const {
    return m2[static_cast<std::size_t>(s) * grid.nodes() + k];
  }
};

/// Conditional moment flow (and terminal clouds) detached from the ensemble
/// that produced it; the exogenous population when costs are evaluated for a
/// deviating player.
struct ConditionalFlow {
  TimeGrid grid;
  int n_common = 0;
  int n_particles = 0;
  std::vector<double> mbar;                // [scenario][node]
  std::vector<double> m2;                  // [scenario][node]
  std::vector<EmpiricalMeasure> terminal;  // per scenario

  double mean(int s, int k) const {
    return mbar[static_cast<std::size_t>(s) * grid.nodes() + k];
  }
  double second(int s, int k) const {
    return m2[static_cast<std::size_t>(s) * grid.nodes() + k];
  }
};

ConditionalFlow conditional_flow(const PathEnsemble& paths);

/// Scenario cloud at one node as a measure (uniform weights).
EmpiricalMeasure measure_at(const PathEnsemble& paths, int scenario, int node);

/// Euler scheme under the given feedback control. Noise steps are consumed
/// from `node_offset` onward, so an interval solve can reuse one full-horizon
/// ensemble. Control features use the running cloud moments of the ensemble
/// being propagated.
PathEnsemble propagate(const ControlField& control, std::span<const double> init,
                       const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                       int node_offset = 0);

/// Same scheme, but control features read an exogenous flow (at global nodes
/// node_offset + k): the single-deviation semantics of cost evaluation.
PathEnsemble propagate_on_flow(const ControlField& control, std::span<const double> init,
                               const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                               const ConditionalFlow& flow, int node_offset = 0);

}  // namespace mfg

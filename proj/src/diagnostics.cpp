#include "mfg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfg/fbsde.hpp"
#include "mfg/rng.hpp"

namespace mfg {

namespace {

/// Per-path totals of running effort plus terminal cost, flat
/// [scenario][particle]. Features and terminal clouds come from the frozen
/// flow throughout.
std::vector<double> path_costs(const ControlField& control, const MfgModel& model,
                               const ConditionalFlow& flow, std::span<const double> init,
                               const NoiseEnsemble& noise) {
  if (!(control.grid == flow.grid)) {
    throw std::invalid_argument("evaluate_cost: control and flow grids differ");
  }
  const PathEnsemble paths =
      propagate_on_flow(control, init, noise, model.sigma, model.sigma_tilde, flow);
  const int nc = paths.n_common;
  const int np = paths.n_particles;
  const int steps = paths.grid.steps;
  const double dt = paths.grid.dt();
  std::vector<double> totals(static_cast<std::size_t>(nc) * np, 0.0);

#pragma omp parallel for schedule(static)
  for (int s = 0; s < nc; ++s) {
    double* tot = totals.data() + static_cast<std::size_t>(s) * np;
    for (int k = 0; k < steps; ++k) {
      const auto xs = paths.states(s, k);
      const double mbar = flow.mean(s, k);
      const double m2 = flow.second(s, k);
      const auto row = control.row(k);
      for (int j = 0; j < np; ++j) {
        const double a = control.basis.combine(row, xs[j], mbar, m2);
        tot[j] += 0.5 * a * a * dt;
      }
    }
    const auto xt = paths.states(s, steps);
    const EmpiricalMeasure& cloud = flow.terminal[s];
    if (model.cost.quadratic_g()) {
      double c2, c1, c0;
      model.cost.quadratic_g_given(cloud, c2, c1, c0);
      for (int j = 0; j < np; ++j) tot[j] += (c2 * xt[j] + c1) * xt[j] + c0;
    } else {
      for (int j = 0; j < np; ++j) tot[j] += model.cost.g(xt[j], cloud);
    }
  }
  return totals;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) /
                   static_cast<double>(v.size()));
}

/// Paths within a scenario share the common noise, so the honest error bar
/// for scenario-coupled quantities treats each scenario as one observation.
double cluster_std_error(std::span<const double> v, int n_common, int n_particles) {
  if (n_common < 2) return 0.0;
  std::vector<double> means(n_common);
  for (int s = 0; s < n_common; ++s) {
    means[s] = mean_of(v.subspan(static_cast<std::size_t>(s) * n_particles,
                                 static_cast<std::size_t>(n_particles)));
  }
  const double m = mean_of(means);
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / (n_common - 1.0) / n_common);
}

}  // namespace

CostReport evaluate_cost(const ControlField& control, const MfgModel& model,
                         const ConditionalFlow& flow, std::span<const double> init,
                         const NoiseEnsemble& noise) {
  const auto totals = path_costs(control, model, flow, init, noise);
  CostReport rep;
  rep.value = mean_of(totals);
  rep.std_error = sample_std_error(totals);
  rep.n = static_cast<int>(totals.size());
  return rep;
}

SmpReport smp_gap(const MfgSolution& sol, const MfgModel& model, int n_perturbations,
                  double amplitude, std::uint64_t seed) {
  if (n_perturbations < 1) {
    throw std::invalid_argument("smp_gap: need at least one perturbation");
  }
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw std::invalid_argument("smp_gap: amplitude must be positive");
  }
  const int nc = sol.paths.n_common;
  const int np = sol.paths.n_particles;
  const NoiseEnsemble noise = sample_noise(sol.paths.grid, nc, np, sol.seed);
  const std::vector<double> init = sample_initial(model.initial, nc, np, sol.seed);
  const std::vector<double> base = path_costs(sol.control, model, sol.flow, init, noise);

  SmpReport rep;
  rep.base_value = mean_of(base);
  rep.min_gap = std::numeric_limits<double>::infinity();
  std::vector<double> diffs(base.size());

  for (int p = 0; p < n_perturbations; ++p) {
    ControlField candidate = sol.control;
    for (std::size_t f = 0; f < candidate.basis.size(); ++f) {
      const double u = uniform01(seed, Stream::perturbation, static_cast<std::uint32_t>(p),
                                 static_cast<std::uint32_t>(f));
      const double shift = amplitude * (2.0 * u - 1.0);
      for (int k = 0; k < candidate.grid.nodes(); ++k) candidate.row(k)[f] += shift;
    }
    const std::vector<double> cand = path_costs(candidate, model, sol.flow, init, noise);
    for (std::size_t i = 0; i < cand.size(); ++i) diffs[i] = cand[i] - base[i];
    const double gap = mean_of(diffs);
    rep.gaps.push_back(gap);
    if (gap < rep.min_gap) {
      rep.min_gap = gap;
      rep.argmin = p;
      rep.min_gap_std_error = cluster_std_error(diffs, nc, np);
    }
  }
  return rep;
}

ExploitabilityReport exploitability(const MfgSolution& sol, const MfgModel& model,
                                    const SolverOptions& opts) {
  const int nc = sol.paths.n_common;
  const int np = sol.paths.n_particles;
  const NoiseEnsemble noise = sample_noise(sol.paths.grid, nc, np, sol.seed);
  const std::vector<double> init = sample_initial(model.initial, nc, np, sol.seed);

  InnerOptions inner;
  inner.damping = opts.inner_damping;
  inner.tol = opts.inner_tol;
  inner.max_iter = opts.inner_max_iter;
  inner.regression = opts.regression;
  const FrozenTerminal frozen = FrozenTerminal::from_cost(model.cost, sol.flow.terminal);
  const InnerResult br = solve_inner(sol.control, init, noise, model.sigma, model.sigma_tilde,
                                     frozen, inner);

  const std::vector<double> base = path_costs(sol.control, model, sol.flow, init, noise);
  const std::vector<double> best = path_costs(br.control, model, sol.flow, init, noise);
  std::vector<double> diffs(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) diffs[i] = base[i] - best[i];

  ExploitabilityReport rep;
  rep.j_control = mean_of(base);
  rep.j_best = mean_of(best);
  rep.value = rep.j_control - rep.j_best;
  rep.std_error = cluster_std_error(diffs, nc, np);
  rep.br_iterations = br.iterations;
  rep.br_converged = br.converged;
  return rep;
}

namespace {

LqOracle make_oracle(double a_t, double c_t, double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("LqOracle: horizon must be positive");
  }
  if (a_t < 0.0) throw std::invalid_argument("LqOracle: terminal slope must be >= 0");
  if (1.0 + c_t * horizon <= 0.0) {
    throw std::invalid_argument("LqOracle: mean slope blows up inside the horizon");
  }
  return {a_t, c_t, horizon};
}

}  // namespace

LqOracle LqOracle::track_mean(double q, double q_bar, double s, double horizon) {
  return make_oracle(2.0 * (q + q_bar), 2.0 * (q + q_bar * (1.0 - s)), horizon);
}

LqOracle LqOracle::state_quadratic(double a, double horizon) {
  return make_oracle(2.0 * a, 2.0 * a, horizon);
}

LqOracle LqOracle::mean_square_distance(double horizon) {
  return make_oracle(2.0, 0.0, horizon);
}

double LqOracle::a(double t) const { return a_T / (1.0 + a_T * (horizon - t)); }

double LqOracle::c(double t) const { return c_T / (1.0 + c_T * (horizon - t)); }

ControlField LqOracle::control_field(const TimeGrid& grid, const FeatureBasis& basis) const {
  const auto& feats = basis.features();
  const auto ix = std::find(feats.begin(), feats.end(), Feature::x);
  const auto im = std::find(feats.begin(), feats.end(), Feature::mbar);
  if (ix == feats.end() || im == feats.end()) {
    throw std::invalid_argument("LqOracle: basis must contain the x and mbar features");
  }
  ControlField out(grid, basis);
  for (int k = 0; k < grid.nodes(); ++k) {
    const double t = grid.time(k);
    out.row(k)[static_cast<std::size_t>(ix - feats.begin())] = -a(t);
    out.row(k)[static_cast<std::size_t>(im - feats.begin())] = -b(t);
  }
  return out;
}

ReductionReport reduction_check(const PathEnsemble& paths) {
  const int nodes = paths.grid.nodes();
  const int nc = paths.n_common;
  const int np = paths.n_particles;
  ReductionReport rep;
  rep.mean_w2.resize(nodes);
  rep.pooled_sigma.resize(nodes);

#pragma omp parallel for schedule(static)
  for (int k = 0; k < nodes; ++k) {
    std::vector<double> pooled_samples;
    pooled_samples.reserve(static_cast<std::size_t>(nc) * np);
    double mp = 0.0;
    double m2p = 0.0;
    for (int s = 0; s < nc; ++s) {
      const auto xs = paths.states(s, k);
      pooled_samples.insert(pooled_samples.end(), xs.begin(), xs.end());
      mp += paths.mean(s, k);
      m2p += paths.second(s, k);
    }
    mp /= nc;
    m2p /= nc;
    const EmpiricalMeasure pooled = EmpiricalMeasure::from_samples(pooled_samples);
    double acc = 0.0;
    for (int s = 0; s < nc; ++s) acc += wasserstein2(measure_at(paths, s, k), pooled);
    rep.mean_w2[k] = acc / nc;
    rep.pooled_sigma[k] = std::sqrt(std::max(m2p - mp * mp, 0.0));
  }

  for (int k = 0; k < nodes; ++k) {
    if (rep.pooled_sigma[k] > 1e-15) {
      const double scale = rep.pooled_sigma[k] / std::sqrt(static_cast<double>(np));
      rep.worst_ratio = std::max(rep.worst_ratio, rep.mean_w2[k] / scale);
    }
  }
  return rep;
}

AssumptionSuite run_assumption_checks(const TerminalCost& cost, std::int64_t trials,
                                      std::uint64_t seed, bool include_lasry_lions) {
  AssumptionSuite suite;
  const Assumption core[] = {Assumption::a1_lipschitz_x, Assumption::a2_convex_x,
                             Assumption::a3_lipschitz_m, Assumption::a4_weak_monotone};
  suite.core_passed = true;
  for (Assumption a : core) {
    suite.reports.push_back(check_assumption(cost, a, trials, seed));
    suite.core_passed = suite.core_passed && suite.reports.back().passed();
  }
  if (include_lasry_lions) {
    suite.reports.push_back(check_assumption(cost, Assumption::lasry_lions, trials, seed));
  }
  return suite;
}

}  // namespace mfg

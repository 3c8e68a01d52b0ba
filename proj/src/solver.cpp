#include "mfg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace mfg {

void validate_model(const MfgModel& model) {
  if (!std::isfinite(model.sigma) || model.sigma <= 0.0) {
    throw std::invalid_argument("model: sigma must be finite and positive");
  }
  if (!std::isfinite(model.sigma_tilde) || model.sigma_tilde < 0.0) {
    throw std::invalid_argument("model: sigma_tilde must be finite and >= 0");
  }
  if (!std::isfinite(model.horizon) || model.horizon <= 0.0) {
    throw std::invalid_argument("model: horizon must be finite and positive");
  }
}

namespace {

template <class Gap2>
double h2_accumulate(const PathEnsemble& paths, Gap2&& gap2) {
  const double dt = paths.grid.dt();
  std::vector<double> per(paths.n_common, 0.0);

#pragma omp parallel for schedule(static)
  for (int s = 0; s < paths.n_common; ++s) {
    double acc = 0.0;
    for (int k = 0; k < paths.grid.steps; ++k) {
      const auto xs = paths.states(s, k);
      const double mbar = paths.mean(s, k);
      const double m2 = paths.second(s, k);
      double node_acc = 0.0;
      for (double x : xs) node_acc += gap2(k, x, mbar, m2);
      acc += node_acc / paths.n_particles;
    }
    per[s] = acc * dt;
  }
  double total = 0.0;
  for (double v : per) total += v;  // fixed scenario order
  return std::sqrt(total / paths.n_common);
}

}  // namespace

double h2_distance(const ControlField& a, const ControlField& b, const PathEnsemble& paths) {
  if (!(a.grid == paths.grid) || !(b.grid == paths.grid)) {
    throw std::invalid_argument("h2_distance: control and ensemble grids differ");
  }
  return h2_accumulate(paths, [&a, &b](int k, double x, double mbar, double m2) {
    const double d = a.eval(k, x, mbar, m2) - b.eval(k, x, mbar, m2);
    return d * d;
  });
}

double h2_norm(const ControlField& a, const PathEnsemble& paths) {
  if (!(a.grid == paths.grid)) {
    throw std::invalid_argument("h2_norm: control and ensemble grids differ");
  }
  return h2_accumulate(paths, [&a](int k, double x, double mbar, double m2) {
    const double v = a.eval(k, x, mbar, m2);
    return v * v;
  });
}

namespace {

FrozenTerminal freeze_terminal(const TerminalSpec& terminal, const PathEnsemble& reference) {
  const int last = reference.grid.steps;
  if (const auto* cost = std::get_if<TerminalCost>(&terminal)) {
    std::vector<EmpiricalMeasure> clouds;
    clouds.reserve(reference.n_common);
    for (int s = 0; s < reference.n_common; ++s) {
      clouds.push_back(measure_at(reference, s, last));
    }
    return FrozenTerminal::from_cost(*cost, clouds);
  }
  const auto& field = std::get<DecouplingField>(terminal);
  std::vector<double> mbar(reference.n_common);
  std::vector<double> m2(reference.n_common);
  for (int s = 0; s < reference.n_common; ++s) {
    mbar[s] = reference.mean(s, last);
    m2[s] = reference.second(s, last);
  }
  return FrozenTerminal::from_coefficients(field.basis, field.coeffs, std::move(mbar),
                                           std::move(m2));
}

void validate_solver_options(const SolverOptions& opts) {
  if (!(opts.damping > 0.0) || opts.damping > 1.0) {
    throw std::invalid_argument("solver: damping must lie in (0, 1]");
  }
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
  if (opts.max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
  if (!(opts.split_ratio_threshold > 0.0)) {
    throw std::invalid_argument("solver: split_ratio_threshold must be positive");
  }
  if (opts.split_ratio_window < 1) {
    throw std::invalid_argument("solver: split_ratio_window must be >= 1");
  }
}

InnerOptions inner_options(const SolverOptions& opts) {
  InnerOptions inner;
  inner.damping = opts.inner_damping;
  inner.tol = opts.inner_tol;
  inner.max_iter = opts.inner_max_iter;
  inner.regression = opts.regression;
  return inner;
}

DecouplingField fit_field(const ControlField& control, const PathEnsemble& paths, double time,
                          double node_r2) {
  DecouplingField f;
  f.time = time;
  f.basis = control.basis;
  const auto row = control.row(0);
  f.coeffs.assign(row.begin(), row.end());
  for (double& c : f.coeffs) c = -c;
  f.r2 = node_r2;
  double lx = 0.0;
  double lm = 0.0;
  for (int s = 0; s < paths.n_common; ++s) {
    const double mbar = paths.mean(s, 0);
    for (double x : paths.states(s, 0)) {
      lx = std::max(lx, std::abs(f.basis.d_dx(f.coeffs, x, mbar)));
      lm = std::max(lm, std::abs(f.basis.d_dmbar(f.coeffs, x)));
    }
  }
  f.lip_x = lx;
  f.lip_m = lm;
  return f;
}

}  // namespace

PhiResult phi_map(const ControlField& alpha, std::span<const double> init,
                  const NoiseEnsemble& noise, const MfgModel& model,
                  const TerminalSpec& terminal, const InnerOptions& inner_opts,
                  int node_offset) {
  validate_model(model);
  PhiResult out;
  out.reference = propagate(alpha, init, noise, model.sigma, model.sigma_tilde, node_offset);
  const FrozenTerminal frozen = freeze_terminal(terminal, out.reference);
  out.inner = solve_inner(alpha, init, noise, model.sigma, model.sigma_tilde, frozen, inner_opts,
                          node_offset);
  out.control = out.inner.control;
  return out;
}

IntervalResult solve_interval(const ControlField& start, std::span<const double> init,
                              const NoiseEnsemble& noise, const MfgModel& model,
                              const TerminalSpec& terminal, const SolverOptions& opts,
                              int node_offset) {
  validate_model(model);
  validate_solver_options(opts);
  const InnerOptions inner = inner_options(opts);

  IntervalResult res;
  res.control = start;
  double prev_distance = std::numeric_limits<double>::quiet_NaN();
  int high_ratio_run = 0;
  bool done = false;

  while (!done && res.iterations < opts.max_iter) {
    PhiResult phi = phi_map(res.control, init, noise, model, terminal, inner, node_offset);
    if (phi.inner.diverged) {
      // The single-player iterates ran away: the map is nowhere near
      // contractive at this length, which is a split request in the extreme.
      res.status = IntervalResult::Status::split_ratio;
      res.residual = std::numeric_limits<double>::infinity();
      done = true;
      break;
    }
    ControlField next = blend(res.control, phi.control, opts.damping);
    const double gap = h2_distance(next, res.control, phi.reference);
    const double dist = gap / std::max(1.0, h2_norm(next, phi.reference));
    double ratio = std::numeric_limits<double>::quiet_NaN();
    if (res.iterations > 0 && prev_distance > 0.0) ratio = dist / prev_distance;

    res.iterations += 1;
    res.history.push_back({res.iterations, dist, ratio});
    res.control = std::move(next);
    res.residual = dist;
    res.r2 = phi.inner.r2;
    prev_distance = dist;

    if (dist <= opts.tol) {
      res.status = IntervalResult::Status::converged;
      done = true;
    } else if (std::isfinite(ratio) && ratio >= opts.split_ratio_threshold) {
      high_ratio_run += 1;
      if (high_ratio_run >= opts.split_ratio_window) {
        res.status = IntervalResult::Status::split_ratio;
        done = true;
      }
    } else {
      high_ratio_run = 0;
    }
  }
  if (!done) res.status = IntervalResult::Status::split_max_iter;

  res.paths = propagate(res.control, init, noise, model.sigma, model.sigma_tilde, node_offset);
  if (res.status == IntervalResult::Status::converged) {
    const double node_r2 = res.r2.empty() ? 0.0 : res.r2.front();
    res.field = fit_field(res.control, res.paths, res.control.grid.t0, node_r2);
  }
  return res;
}

namespace {

ControlField slice_control(const ControlField& global, int a, int len) {
  const TimeGrid sub(global.grid.time(a), global.grid.time(a + len), len);
  ControlField out(sub, global.basis);
  for (int k = 0; k <= len; ++k) {
    const auto src = global.row(a + k);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

void write_back(ControlField& global, const ControlField& piece, int a) {
  for (int k = 0; k <= piece.grid.steps; ++k) {
    const auto src = piece.row(k);
    std::copy(src.begin(), src.end(), global.row(a + k).begin());
  }
}

std::vector<double> node_states(const PathEnsemble& paths, int node) {
  std::vector<double> out(static_cast<std::size_t>(paths.n_common) * paths.n_particles);
  for (int s = 0; s < paths.n_common; ++s) {
    const auto xs = paths.states(s, node);
    std::copy(xs.begin(), xs.end(),
              out.begin() + static_cast<std::size_t>(s) * paths.n_particles);
  }
  return out;
}

IntervalRecord make_record(int a, int b, bool forward, const IntervalResult& r) {
  IntervalRecord rec;
  rec.first_node = a;
  rec.last_node = b;
  rec.forward = forward;
  rec.status = r.status;
  rec.iterations = r.iterations;
  rec.residual = r.residual;
  rec.history = r.history;
  rec.field = r.field;
  return rec;
}

}  // namespace

MfgSolution solve_mfg(const MfgModel& model, int steps, int n_common, int n_particles,
                      std::uint64_t seed, const SolverOptions& opts,
                      const std::optional<ControlField>& initial_control) {
  validate_model(model);
  validate_solver_options(opts);
  if (steps < 1) throw std::invalid_argument("solve_mfg: steps must be >= 1");
  const TimeGrid grid(0.0, model.horizon, steps);

  ControlField global = initial_control ? *initial_control
                                        : ControlField(grid, opts.regression.basis);
  if (!(global.grid == grid)) {
    throw std::invalid_argument("solve_mfg: initial control does not live on the solve grid");
  }
  if (!(global.basis == opts.regression.basis)) {
    throw std::invalid_argument("solve_mfg: initial control basis differs from the regression basis");
  }

  const NoiseEnsemble noise = sample_noise(grid, n_common, n_particles, seed);
  const std::vector<double> init0 = sample_initial(model.initial, n_common, n_particles, seed);

  MfgSolution sol;
  sol.seed = seed;

  // Provisional flow for interval initial conditions; refined by the forward
  // sweep once every interval has converged once.
  const PathEnsemble provisional =
      propagate(global, init0, noise, model.sigma, model.sigma_tilde);

  struct Piece {
    int a = 0;
    int b = 0;
    DecouplingField field;
  };
  std::vector<Piece> pieces;
  bool backward_ok = true;

  int right = steps;
  TerminalSpec right_terminal = model.cost;
  while (right > 0 && backward_ok) {
    int len = right;
    bool placed = false;
    while (!placed) {
      const int a = right - len;
      const ControlField start = slice_control(global, a, len);
      const std::vector<double> init_a = node_states(provisional, a);
      IntervalResult r =
          solve_interval(start, init_a, noise, model, right_terminal, opts, a);
      sol.intervals.push_back(make_record(a, right, false, r));
      sol.total_iterations += r.iterations;
      if (r.status == IntervalResult::Status::converged) {
        write_back(global, r.control, a);
        pieces.push_back({a, right, r.field});
        right = a;
        if (right > 0) right_terminal = pieces.back().field;
        placed = true;
      } else {
        len /= 2;
        if (len < 1) {
          // The interval shrank below one step; give up on continuation and
          // report the best assembled feedback unconverged.
          backward_ok = false;
          placed = true;
        }
      }
    }
  }

  bool forward_ok = backward_ok;
  if (backward_ok) {
    std::reverse(pieces.begin(), pieces.end());
    std::vector<double> cur_init = init0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const Piece& piece = pieces[i];
      const TerminalSpec term = (piece.b == steps)
                                    ? TerminalSpec(model.cost)
                                    : TerminalSpec(pieces[i + 1].field);
      const ControlField start = slice_control(global, piece.a, piece.b - piece.a);
      IntervalResult r = solve_interval(start, cur_init, noise, model, term, opts, piece.a);
      sol.intervals.push_back(make_record(piece.a, piece.b, true, r));
      sol.total_iterations += r.iterations;
      forward_ok = forward_ok && r.status == IntervalResult::Status::converged;
      write_back(global, r.control, piece.a);
      cur_init = node_states(r.paths, r.paths.grid.steps);
    }
  }

  sol.converged = backward_ok && forward_ok;
  sol.control = std::move(global);
  sol.paths = propagate(sol.control, init0, noise, model.sigma, model.sigma_tilde);
  sol.flow = conditional_flow(sol.paths);
  return sol;
}

UniquenessProbe uniqueness_probe(const MfgModel& model, int steps, int n_common,
                                 int n_particles, std::uint64_t seed, const SolverOptions& opts,
                                 std::vector<double> starts) {
  if (starts.size() < 2) {
    throw std::invalid_argument("uniqueness_probe: need at least two start levels");
  }
  validate_model(model);
  const TimeGrid grid(0.0, model.horizon, steps);

  UniquenessProbe probe;
  probe.starts = starts;
  probe.all_converged = true;

  std::vector<ControlField> controls;
  controls.reserve(starts.size());
  PathEnsemble reference;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const ControlField start = ControlField::constant(grid, opts.regression.basis, starts[i]);
    MfgSolution s = solve_mfg(model, steps, n_common, n_particles, seed, opts, start);
    probe.all_converged = probe.all_converged && s.converged;
    controls.push_back(std::move(s.control));
    if (i == 0) reference = std::move(s.paths);
  }

  for (std::size_t i = 0; i < controls.size(); ++i) {
    for (std::size_t j = i + 1; j < controls.size(); ++j) {
      const double gap = h2_distance(controls[i], controls[j], reference);
      const double d = gap / std::max(1.0, h2_norm(controls[i], reference));
      probe.pairwise.push_back(d);
      probe.max_relative = std::max(probe.max_relative, d);
    }
  }
  return probe;
}

}  // namespace mfg

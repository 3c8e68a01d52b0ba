#include "mfg/fbsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "mfg/solver.hpp"

namespace mfg {

FrozenTerminal FrozenTerminal::from_cost(const TerminalCost& cost,
                                         const std::vector<EmpiricalMeasure>& clouds) {
  if (clouds.empty()) {
    throw std::invalid_argument("FrozenTerminal: need at least one terminal cloud");
  }
  FrozenTerminal t;
  t.n_common_ = static_cast<int>(clouds.size());
  if (cost.affine_gx()) {
    t.mode_ = Mode::affine;
    t.slope_.resize(clouds.size());
    t.offset_.resize(clouds.size());
    for (std::size_t s = 0; s < clouds.size(); ++s) {
      cost.affine_gx_given(clouds[s], t.slope_[s], t.offset_[s]);
    }
  } else {
    t.mode_ = Mode::general;
    t.clouds_ = clouds;
    t.cost_ = cost;
  }
  return t;
}

FrozenTerminal FrozenTerminal::from_coefficients(FeatureBasis basis, std::vector<double> coeffs,
                                                 std::vector<double> mbar,
                                                 std::vector<double> m2) {
  if (coeffs.size() != basis.size()) {
    throw std::invalid_argument("FrozenTerminal: coefficient row does not match the basis");
  }
  if (mbar.empty() || mbar.size() != m2.size()) {
    throw std::invalid_argument("FrozenTerminal: need matching per-scenario moment vectors");
  }
  FrozenTerminal t;
  t.mode_ = Mode::coefficients;
  t.n_common_ = static_cast<int>(mbar.size());
  t.basis_ = std::move(basis);
  t.coeffs_ = std::move(coeffs);
  t.mbar_ = std::move(mbar);
  t.m2_ = std::move(m2);
  return t;
}

double FrozenTerminal::eval(int scenario, double x) const {
  switch (mode_) {
    case Mode::affine:
      return slope_[scenario] * x + offset_[scenario];
    case Mode::general:
      return cost_.gx(x, clouds_[scenario]);
    case Mode::coefficients:
      return basis_.combine(coeffs_, x, mbar_[scenario], m2_[scenario]);
  }
  return 0.0;
}

std::vector<double> FrozenTerminal::eval_terminal(const PathEnsemble& paths) const {
  if (paths.n_common != n_common_) {
    throw std::invalid_argument("FrozenTerminal: ensemble scenario count does not match");
  }
  const int last = paths.grid.steps;
  const int np = paths.n_particles;
  std::vector<double> out(static_cast<std::size_t>(n_common_) * np);

#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_common_; ++s) {
    const auto xs = paths.states(s, last);
    double* dst = out.data() + static_cast<std::size_t>(s) * np;
    switch (mode_) {
      case Mode::affine: {
        const double sl = slope_[s];
        const double of = offset_[s];
        for (int j = 0; j < np; ++j) dst[j] = sl * xs[j] + of;
        break;
      }
      case Mode::general:
        for (int j = 0; j < np; ++j) dst[j] = cost_.gx(xs[j], clouds_[s]);
        break;
      case Mode::coefficients: {
        const double mb = mbar_[s];
        const double m2 = m2_[s];
        for (int j = 0; j < np; ++j) dst[j] = basis_.combine(coeffs_, xs[j], mb, m2);
        break;
      }
    }
  }
  return out;
}

std::vector<double> terminal_adjoint(const TerminalCost& cost, const PathEnsemble& paths) {
  std::vector<EmpiricalMeasure> clouds;
  clouds.reserve(paths.n_common);
  for (int s = 0; s < paths.n_common; ++s) {
    clouds.push_back(measure_at(paths, s, paths.grid.steps));
  }
  return FrozenTerminal::from_cost(cost, clouds).eval_terminal(paths);
}

namespace {

void validate_inner(const ControlField& start, const FrozenTerminal& terminal,
                    const NoiseEnsemble& noise, const InnerOptions& opts) {
  if (opts.max_iter < 1) throw std::invalid_argument("solve_inner: max_iter must be >= 1");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve_inner: tol must be positive");
  if (!(opts.regression.basis == start.basis)) {
    throw std::invalid_argument("solve_inner: control and regression bases differ");
  }
  if (terminal.n_common() != noise.n_common) {
    throw std::invalid_argument("solve_inner: terminal and noise disagree on n_common");
  }
}

ControlField negated_fit_field(const ControlField& like, const std::vector<NodeFit>& fits) {
  ControlField update(like.grid, like.basis);
  const std::size_t p = like.basis.size();
  for (int k = 0; k < like.grid.nodes(); ++k) {
    auto row = update.row(k);
    for (std::size_t a = 0; a < p; ++a) row[a] = -fits[k].coeffs[a];
  }
  return update;
}

// Beyond this state scale the within-scenario spread is below one rounding
// unit, so the node regressions stop meaning anything: the Picard iterates
// are running away, not converging.
constexpr double kStateScaleGuard = 1e8;

bool ensemble_diverged(const PathEnsemble& paths) {
  for (double v : paths.mbar) {
    if (!std::isfinite(v) || std::abs(v) > kStateScaleGuard) return true;
  }
  for (double v : paths.m2) {
    if (!std::isfinite(v) || v > kStateScaleGuard * kStateScaleGuard) return true;
  }
  return false;
}

}  // namespace

InnerResult solve_inner(const ControlField& start, std::span<const double> init,
                        const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                        const FrozenTerminal& terminal, const InnerOptions& opts,
                        int node_offset) {
  validate_inner(start, terminal, noise, opts);
  InnerResult res;
  res.control = start;

  while (res.iterations < opts.max_iter) {
    PathEnsemble paths;
    try {
      paths = propagate(res.control, init, noise, sigma, sigma_tilde, node_offset);
    } catch (const std::runtime_error& e) {
      // Overflow inside one sweep is the same runaway the scale guard below
      // catches one iteration earlier; report it the same way.
      if (std::string_view(e.what()).find("non-finite state") == std::string_view::npos) throw;
      res.diverged = true;
      res.residual = std::numeric_limits<double>::infinity();
      return res;
    }
    if (ensemble_diverged(paths)) {
      res.diverged = true;
      res.residual = std::numeric_limits<double>::infinity();
      res.paths = std::move(paths);
      return res;
    }
    const std::vector<double> y_t = terminal.eval_terminal(paths);
    const std::vector<NodeFit> fits = fit_all_nodes(paths, y_t, opts.regression);
    ControlField next = blend(res.control, negated_fit_field(res.control, fits), opts.damping);

    const double gap = h2_distance(next, res.control, paths);
    const double denom = std::max(1.0, h2_norm(next, paths));
    res.residual = gap / denom;
    res.control = std::move(next);
    res.iterations += 1;
    res.r2.resize(fits.size());
    for (std::size_t k = 0; k < fits.size(); ++k) res.r2[k] = fits[k].r2;
    if (res.residual <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.paths = propagate(res.control, init, noise, sigma, sigma_tilde, node_offset);
  return res;
}

double fbsde_residual(const ControlField& control, std::span<const double> init,
                      const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                      const FrozenTerminal& terminal, const InnerOptions& opts,
                      int node_offset) {
  validate_inner(control, terminal, noise, opts);
  PathEnsemble paths = propagate(control, init, noise, sigma, sigma_tilde, node_offset);
  const std::vector<double> y_t = terminal.eval_terminal(paths);
  const std::vector<NodeFit> fits = fit_all_nodes(paths, y_t, opts.regression);
  const ControlField next = blend(control, negated_fit_field(control, fits), opts.damping);
  return h2_distance(next, control, paths) / std::max(1.0, h2_norm(next, paths));
}

}  // namespace mfg

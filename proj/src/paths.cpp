#include "mfg/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "mfg/rng.hpp"

namespace mfg {

TimeGrid::TimeGrid(double t0_, double t1_, int steps_) : t0(t0_), t1(t1_), steps(steps_) {
  if (!std::isfinite(t0) || !std::isfinite(t1)) {
    throw std::invalid_argument("TimeGrid: endpoints must be finite");
  }
  if (!(t1 > t0)) {
    throw std::invalid_argument("TimeGrid: t1 must exceed t0");
  }
  if (steps < 1) {
    throw std::invalid_argument("TimeGrid: steps must be at least 1");
  }
}

InitialDistribution InitialDistribution::dirac(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("initial dirac: value must be finite");
  return {Kind::dirac, x, 0.0};
}

InitialDistribution InitialDistribution::gaussian(double mean, double stddev) {
  if (!std::isfinite(mean) || !std::isfinite(stddev) || stddev < 0.0) {
    throw std::invalid_argument("initial gaussian: need finite mean and stddev >= 0");
  }
  return {Kind::gaussian, mean, stddev};
}

InitialDistribution InitialDistribution::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi >= lo)) {
    throw std::invalid_argument("initial uniform: need finite lo <= hi");
  }
  return {Kind::uniform, lo, hi};
}

namespace {

void check_ensemble_sizes(int n_common, int n_particles, const char* where) {
  if (n_common < 1) throw std::invalid_argument(std::string(where) + ": n_common must be >= 1");
  if (n_particles < 1) {
    throw std::invalid_argument(std::string(where) + ": n_particles must be >= 1");
  }
}

}  // namespace

NoiseEnsemble sample_noise(const TimeGrid& grid, int n_common, int n_particles,
                           std::uint64_t seed) {
  check_ensemble_sizes(n_common, n_particles, "sample_noise");
  NoiseEnsemble out{grid, n_common, n_particles, seed, {}, {}};
  const std::size_t steps = static_cast<std::size_t>(grid.steps);
  out.dw.resize(static_cast<std::size_t>(n_common) * steps * n_particles);
  out.dw_tilde.resize(static_cast<std::size_t>(n_common) * steps);
  const double root_dt = std::sqrt(grid.dt());

#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_common; ++s) {
    for (int k = 0; k < grid.steps; ++k) {
      const std::size_t base = (static_cast<std::size_t>(s) * steps + k) * n_particles;
      for (int j = 0; j < n_particles; ++j) {
        out.dw[base + j] = root_dt * normal01(seed, Stream::idio_noise, static_cast<std::uint32_t>(s),
                                              static_cast<std::uint32_t>(j),
                                              static_cast<std::uint32_t>(k));
      }
      out.dw_tilde[static_cast<std::size_t>(s) * steps + k] =
          root_dt * normal01(seed, Stream::common_noise, static_cast<std::uint32_t>(s),
                             static_cast<std::uint32_t>(k));
    }
  }
  return out;
}

std::vector<double> sample_initial(const InitialDistribution& dist, int n_common,
                                   int n_particles, std::uint64_t seed) {
  check_ensemble_sizes(n_common, n_particles, "sample_initial");
  std::vector<double> out(static_cast<std::size_t>(n_common) * n_particles);

#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_common; ++s) {
    for (int j = 0; j < n_particles; ++j) {
      const auto a = static_cast<std::uint32_t>(s);
      const auto b = static_cast<std::uint32_t>(j);
      double v = 0.0;
      switch (dist.kind) {
        case InitialDistribution::Kind::dirac:
          v = dist.a;
          break;
        case InitialDistribution::Kind::gaussian:
          v = dist.a + dist.b * normal01(seed, Stream::initial, a, b);
          break;
        case InitialDistribution::Kind::uniform:
          v = dist.a + (dist.b - dist.a) * uniform01(seed, Stream::initial, a, b);
          break;
      }
      out[static_cast<std::size_t>(s) * n_particles + j] = v;
    }
  }
  return out;
}

ControlField::ControlField(const TimeGrid& g, FeatureBasis b)
    : grid(g), basis(std::move(b)),
      coeffs(static_cast<std::size_t>(grid.nodes()) * basis.size(), 0.0) {}

ControlField ControlField::constant(const TimeGrid& g, FeatureBasis b, double value) {
  const auto& feats = b.features();
  const auto it = std::find(feats.begin(), feats.end(), Feature::one);
  if (it == feats.end()) {
    throw std::invalid_argument("ControlField::constant: basis has no constant feature");
  }
  const std::size_t idx = static_cast<std::size_t>(it - feats.begin());
  ControlField out(g, std::move(b));
  for (int k = 0; k < out.grid.nodes(); ++k) out.row(k)[idx] = value;
  return out;
}

ControlField blend(const ControlField& current, const ControlField& update, double damping) {
  if (!(current.grid == update.grid) || !(current.basis == update.basis)) {
    throw std::invalid_argument("blend: control fields live on different grids or bases");
  }
  if (!std::isfinite(damping) || damping < 0.0 || damping > 1.0) {
    throw std::invalid_argument("blend: damping must lie in [0, 1]");
  }
  ControlField out = current;
  for (std::size_t i = 0; i < out.coeffs.size(); ++i) {
    out.coeffs[i] += damping * (update.coeffs[i] - current.coeffs[i]);
  }
  return out;
}

namespace {

struct PropagateArgs {
  int n_common;
  int n_particles;
};

PropagateArgs validate_propagate(const ControlField& control, std::span<const double> init,
                                 const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                                 int node_offset) {
  if (!std::isfinite(sigma) || sigma < 0.0 || !std::isfinite(sigma_tilde) || sigma_tilde < 0.0) {
    throw std::invalid_argument("propagate: volatilities must be finite and >= 0");
  }
  if (node_offset < 0 || node_offset + control.grid.steps > noise.grid.steps) {
    throw std::invalid_argument("propagate: control interval exceeds the noise horizon");
  }
  const double dt_c = control.grid.dt();
  const double dt_n = noise.grid.dt();
  if (std::abs(dt_c - dt_n) > 1e-12 * std::max(1.0, std::abs(dt_n))) {
    throw std::invalid_argument("propagate: control and noise grids disagree on dt");
  }
  const std::size_t want = static_cast<std::size_t>(noise.n_common) * noise.n_particles;
  if (init.size() != want) {
    throw std::invalid_argument("propagate: init has " + std::to_string(init.size()) +
                                " states, noise ensemble expects " + std::to_string(want));
  }
  return {noise.n_common, noise.n_particles};
}

/// Mean and raw second moment in fixed particle order (no reordering, so the
/// result is independent of the thread count).
void cloud_moments(std::span<const double> xs, double& mbar, double& m2) {
  double s1 = 0.0, s2 = 0.0;
  for (double v : xs) {
    s1 += v;
    s2 += v * v;
  }
  mbar = s1 / static_cast<double>(xs.size());
  m2 = s2 / static_cast<double>(xs.size());
}

template <class FeatureMoments>
PathEnsemble propagate_impl(const ControlField& control, std::span<const double> init,
                            const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                            int node_offset, FeatureMoments&& feature_moments) {
  const auto [n_common, n_particles] = validate_propagate(control, init, noise, sigma,
                                                          sigma_tilde, node_offset);
  PathEnsemble out;
  out.grid = control.grid;
  out.n_common = n_common;
  out.n_particles = n_particles;
  const int nodes = out.grid.nodes();
  out.x.resize(static_cast<std::size_t>(n_common) * nodes * n_particles);
  out.mbar.resize(static_cast<std::size_t>(n_common) * nodes);
  out.m2.resize(static_cast<std::size_t>(n_common) * nodes);
  const double dt = out.grid.dt();
  std::vector<int> bad_step(n_common, -1);

#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_common; ++s) {
    auto x0 = out.states(s, 0);
    std::copy_n(init.data() + static_cast<std::size_t>(s) * n_particles, n_particles, x0.begin());
    cloud_moments(x0, out.mbar[static_cast<std::size_t>(s) * nodes],
                  out.m2[static_cast<std::size_t>(s) * nodes]);

    for (int k = 0; k < out.grid.steps && bad_step[s] < 0; ++k) {
      double f_mbar = 0.0, f_m2 = 0.0;
      feature_moments(out, s, k, f_mbar, f_m2);
      const auto row = control.row(k);
      const auto xk = out.states(s, k);
      auto xn = out.states(s, k + 1);
      const double dwt = sigma_tilde * noise.common(s, node_offset + k);
      bool finite = true;
      for (int j = 0; j < n_particles; ++j) {
        const double a = control.basis.combine(row, xk[j], f_mbar, f_m2);
        const double v = xk[j] + a * dt + sigma * noise.idio(s, node_offset + k, j) + dwt;
        xn[j] = v;
        finite = finite && std::isfinite(v);
      }
      if (!finite) {
        bad_step[s] = k;
        break;
      }
      cloud_moments(xn, out.mbar[static_cast<std::size_t>(s) * nodes + k + 1],
                    out.m2[static_cast<std::size_t>(s) * nodes + k + 1]);
    }
  }

  for (int s = 0; s < n_common; ++s) {
    if (bad_step[s] >= 0) {
      throw std::runtime_error("propagate: non-finite state in scenario " + std::to_string(s) +
                               " at step " + std::to_string(node_offset + bad_step[s]) +
                               " (diverging control?)");
    }
  }
  return out;
}

}  // namespace

PathEnsemble propagate(const ControlField& control, std::span<const double> init,
                       const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                       int node_offset) {
  return propagate_impl(control, init, noise, sigma, sigma_tilde, node_offset,
                        [](const PathEnsemble& p, int s, int k, double& mbar, double& m2) {
                          mbar = p.mean(s, k);
                          m2 = p.second(s, k);
                        });
}

PathEnsemble propagate_on_flow(const ControlField& control, std::span<const double> init,
                               const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                               const ConditionalFlow& flow, int node_offset) {
  if (flow.n_common != noise.n_common) {
    throw std::invalid_argument("propagate_on_flow: flow and noise disagree on n_common");
  }
  if (node_offset + control.grid.steps > flow.grid.steps) {
    throw std::invalid_argument("propagate_on_flow: control interval exceeds the flow horizon");
  }
  return propagate_impl(control, init, noise, sigma, sigma_tilde, node_offset,
                        [&flow, node_offset](const PathEnsemble&, int s, int k, double& mbar,
                                             double& m2) {
                          mbar = flow.mean(s, node_offset + k);
                          m2 = flow.second(s, node_offset + k);
                        });
}

ConditionalFlow conditional_flow(const PathEnsemble& paths) {
  ConditionalFlow out{paths.grid, paths.n_common, paths.n_particles, paths.mbar, paths.m2, {}};
  out.terminal.reserve(paths.n_common);
  for (int s = 0; s < paths.n_common; ++s) {
    out.terminal.push_back(measure_at(paths, s, paths.grid.steps));
  }
  return out;
}

EmpiricalMeasure measure_at(const PathEnsemble& paths, int scenario, int node) {
  if (scenario < 0 || scenario >= paths.n_common || node < 0 || node >= paths.grid.nodes()) {
    throw std::invalid_argument("measure_at: scenario or node out of range");
  }
  const auto xs = paths.states(scenario, node);
  return EmpiricalMeasure::from_samples({xs.data(), xs.size()});
}

}  // namespace mfg

#include "mfg/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfg::reference {

PathEnsemble propagate(const ControlField& control, std::span<const double> init,
                       const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                       int node_offset) {
  const std::size_t want = static_cast<std::size_t>(noise.n_common) * noise.n_particles;
  if (init.size() != want || node_offset < 0 ||
      node_offset + control.grid.steps > noise.grid.steps) {
    throw std::invalid_argument("reference propagate: inconsistent arguments");
  }
  PathEnsemble out;
  out.grid = control.grid;
  out.n_common = noise.n_common;
  out.n_particles = noise.n_particles;
  const int nodes = out.grid.nodes();
  out.x.resize(static_cast<std::size_t>(out.n_common) * nodes * out.n_particles);
  out.mbar.resize(static_cast<std::size_t>(out.n_common) * nodes);
  out.m2.resize(static_cast<std::size_t>(out.n_common) * nodes);
  const double dt = out.grid.dt();

  for (int s = 0; s < out.n_common; ++s) {
    auto x0 = out.states(s, 0);
    std::copy_n(init.data() + static_cast<std::size_t>(s) * out.n_particles, out.n_particles,
                x0.begin());
    for (int k = 0; k <= out.grid.steps; ++k) {
      if (k > 0) {
        const auto xp = out.states(s, k - 1);
        auto xk = out.states(s, k);
        const double mbar = out.mean(s, k - 1);
        const double m2 = out.second(s, k - 1);
        const auto row = control.row(k - 1);
        const double dwt = sigma_tilde * noise.common(s, node_offset + k - 1);
        for (int j = 0; j < out.n_particles; ++j) {
          const double a = control.basis.combine(row, xp[j], mbar, m2);
          xk[j] = xp[j] + a * dt + sigma * noise.idio(s, node_offset + k - 1, j) + dwt;
        }
      }
      double s1 = 0.0;
      double s2 = 0.0;
      for (double v : out.states(s, k)) {
        s1 += v;
        s2 += v * v;
      }
      out.mbar[static_cast<std::size_t>(s) * nodes + k] = s1 / out.n_particles;
      out.m2[static_cast<std::size_t>(s) * nodes + k] = s2 / out.n_particles;
    }
  }
  return out;
}

NodeFit fit_conditional(const PathEnsemble& paths, int node, std::span<const double> targets,
                        const RegressionBasis& rb) {
  const std::size_t want = static_cast<std::size_t>(paths.n_common) * paths.n_particles;
  if (targets.size() != want) {
    throw std::invalid_argument("reference fit: target count does not match the ensemble");
  }
  const int p = static_cast<int>(rb.basis.size());
  std::vector<double> gram(static_cast<std::size_t>(p) * p, 0.0);
  std::vector<double> rhs(p, 0.0);
  std::vector<double> phi(p);
  double y2 = 0.0;
  double ysum = 0.0;

  for (int s = 0; s < paths.n_common; ++s) {
    const auto xs = paths.states(s, node);
    const double mbar = paths.mean(s, node);
    const double m2 = paths.second(s, node);
    const double* ys = targets.data() + static_cast<std::size_t>(s) * paths.n_particles;
    for (int j = 0; j < paths.n_particles; ++j) {
      rb.basis.evaluate(xs[j], mbar, m2, phi);
      const double y = ys[j];
      for (int a = 0; a < p; ++a) {
        for (int b = 0; b < p; ++b) {
          gram[static_cast<std::size_t>(a) * p + b] += phi[a] * phi[b];
        }
        rhs[a] += phi[a] * y;
      }
      y2 += y * y;
      ysum += y;
    }
  }

  const double n = static_cast<double>(targets.size());
  std::vector<double> g0 = gram;
  const double lambda = rb.ridge_scale * n;
  for (int a = 0; a < p; ++a) gram[static_cast<std::size_t>(a) * p + a] += lambda;

  // Gaussian elimination with partial pivoting on [gram | rhs].
  std::vector<double> beta = rhs;
  for (int col = 0; col < p; ++col) {
    int pivot = col;
    for (int r = col + 1; r < p; ++r) {
      if (std::abs(gram[static_cast<std::size_t>(r) * p + col]) >
          std::abs(gram[static_cast<std::size_t>(pivot) * p + col])) {
        pivot = r;
      }
    }
    if (std::abs(gram[static_cast<std::size_t>(pivot) * p + col]) == 0.0) {
      throw std::runtime_error("reference fit: singular normal equations at node " +
                               std::to_string(node));
    }
    if (pivot != col) {
      for (int c = 0; c < p; ++c) {
        std::swap(gram[static_cast<std::size_t>(col) * p + c],
                  gram[static_cast<std::size_t>(pivot) * p + c]);
      }
      std::swap(beta[col], beta[pivot]);
    }
    for (int r = col + 1; r < p; ++r) {
      const double f = gram[static_cast<std::size_t>(r) * p + col] /
                       gram[static_cast<std::size_t>(col) * p + col];
      for (int c = col; c < p; ++c) {
        gram[static_cast<std::size_t>(r) * p + c] -=
            f * gram[static_cast<std::size_t>(col) * p + c];
      }
      beta[r] -= f * beta[col];
    }
  }
  for (int r = p - 1; r >= 0; --r) {
    double sum = beta[r];
    for (int c = r + 1; c < p; ++c) sum -= gram[static_cast<std::size_t>(r) * p + c] * beta[c];
    beta[r] = sum / gram[static_cast<std::size_t>(r) * p + r];
  }

  double quad = 0.0;
  double lin = 0.0;
  for (int a = 0; a < p; ++a) {
    lin += beta[a] * rhs[a];
    for (int b = 0; b < p; ++b) quad += beta[a] * beta[b] * g0[static_cast<std::size_t>(a) * p + b];
  }
  const double ss_res = std::max(y2 - 2.0 * lin + quad, 0.0);
  const double ss_tot = y2 - n * (ysum / n) * (ysum / n);

  NodeFit fit;
  fit.coeffs = beta;
  fit.r2 = ss_tot > 1e-14 * std::max(1.0, y2) ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  // Quantile coupling written as a plain residual-mass walk.
  const auto& pa = a.atoms();
  const auto& pb = b.atoms();
  std::size_t ia = 0;
  std::size_t ib = 0;
  double ra = pa[0].w;
  double rb = pb[0].w;
  double total = 0.0;
  while (ia < pa.size() && ib < pb.size()) {
    const double m = std::min(ra, rb);
    const double d = pa[ia].x - pb[ib].x;
    total += m * d * d;
    ra -= m;
    rb -= m;
    if (ra <= 0.0) {
      ++ia;
      if (ia < pa.size()) ra = pa[ia].w;
    }
    if (rb <= 0.0) {
      ++ib;
      if (ib < pb.size()) rb = pb[ib].w;
    }
  }
  return std::sqrt(std::max(total, 0.0));
}

}  // namespace mfg::reference

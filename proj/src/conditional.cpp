#include "mfg/conditional.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfg {

namespace {

constexpr int kMaxFeatures = 6;

/// Per-scenario power sums at one node: s[p] = sum x^p, t[p] = sum y x^p,
/// y2 = sum y^2. Features are x^d times a moment carrier, so these close the
/// normal equations for any basis with x-degree at most 2.
struct CellSums {
  std::array<double, 5> s{};
  std::array<double, 3> t{};
  double y2 = 0.0;
};

CellSums cell_sums(std::span<const double> xs, const double* ys) {
  CellSums c;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double x = xs[j];
    const double y = ys[j];
    const double x2 = x * x;
    c.s[0] += 1.0;
    c.s[1] += x;
    c.s[2] += x2;
    c.s[3] += x2 * x;
    c.s[4] += x2 * x2;
    c.t[0] += y;
    c.t[1] += y * x;
    c.t[2] += y * x2;
    c.y2 += y * y;
  }
  return c;
}

/// Solves (G + lambda I) beta = rhs by Cholesky; G is p x p row-major.
std::array<double, kMaxFeatures> solve_spd(const std::array<double, kMaxFeatures * kMaxFeatures>& g,
                                           const std::array<double, kMaxFeatures>& rhs,
                                           double lambda, int p, int node) {
  std::array<double, kMaxFeatures * kMaxFeatures> l{};
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = g[static_cast<std::size_t>(i) * kMaxFeatures + j] + (i == j ? lambda : 0.0);
      for (int k = 0; k < j; ++k) {
        sum -= l[static_cast<std::size_t>(i) * kMaxFeatures + k] *
               l[static_cast<std::size_t>(j) * kMaxFeatures + k];
      }
      if (i == j) {
        if (!(sum > 0.0)) {
          throw std::runtime_error(
              "conditional regression: Gram matrix not positive definite at node " +
              std::to_string(node) + " (collinear features; raise ridge_scale or drop features)");
        }
        l[static_cast<std::size_t>(i) * kMaxFeatures + j] = std::sqrt(sum);
      } else {
        l[static_cast<std::size_t>(i) * kMaxFeatures + j] =
            sum / l[static_cast<std::size_t>(j) * kMaxFeatures + j];
      }
    }
  }
  std::array<double, kMaxFeatures> z{};
  for (int i = 0; i < p; ++i) {
    double sum = rhs[i];
    for (int k = 0; k < i; ++k) sum -= l[static_cast<std::size_t>(i) * kMaxFeatures + k] * z[k];
    z[i] = sum / l[static_cast<std::size_t>(i) * kMaxFeatures + i];
  }
  std::array<double, kMaxFeatures> beta{};
  for (int i = p - 1; i >= 0; --i) {
    double sum = z[i];
    for (int k = i + 1; k < p; ++k) {
      sum -= l[static_cast<std::size_t>(k) * kMaxFeatures + i] * beta[k];
    }
    beta[i] = sum / l[static_cast<std::size_t>(i) * kMaxFeatures + i];
  }
  return beta;
}

NodeFit fit_node(const PathEnsemble& paths, int node, std::span<const double> targets,
                 const RegressionBasis& rb, const std::vector<CellSums>& cells) {
  const auto& feats = rb.basis.features();
  const int p = static_cast<int>(feats.size());
  std::array<double, kMaxFeatures * kMaxFeatures> gram{};
  std::array<double, kMaxFeatures> rhs{};
  double y2 = 0.0;
  double ysum = 0.0;

  // Scenario order is fixed, so the assembly is independent of thread count.
  for (int s = 0; s < paths.n_common; ++s) {
    const CellSums& c = cells[s];
    const double mbar = paths.mean(s, node);
    const double m2 = paths.second(s, node);
    std::array<double, kMaxFeatures> carrier{};
    std::array<int, kMaxFeatures> degree{};
    for (int a = 0; a < p; ++a) {
      carrier[a] = FeatureBasis::carrier(feats[a], mbar, m2);
      degree[a] = FeatureBasis::x_degree(feats[a]);
    }
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b <= a; ++b) {
        gram[static_cast<std::size_t>(a) * kMaxFeatures + b] +=
            carrier[a] * carrier[b] * c.s[degree[a] + degree[b]];
      }
      rhs[a] += carrier[a] * c.t[degree[a]];
    }
    y2 += c.y2;
    ysum += c.t[0];
  }
  for (int a = 0; a < p; ++a) {
    for (int b = a + 1; b < p; ++b) {
      gram[static_cast<std::size_t>(a) * kMaxFeatures + b] =
          gram[static_cast<std::size_t>(b) * kMaxFeatures + a];
    }
  }

  const double n = static_cast<double>(targets.size());
  const double lambda = rb.ridge_scale * n;
  const auto beta = solve_spd(gram, rhs, lambda, p, node);

  double quad = 0.0;
  double lin = 0.0;
  for (int a = 0; a < p; ++a) {
    lin += beta[a] * rhs[a];
    for (int b = 0; b < p; ++b) {
      quad += beta[a] * beta[b] * gram[static_cast<std::size_t>(a) * kMaxFeatures + b];
    }
  }
  const double ss_res = std::max(y2 - 2.0 * lin + quad, 0.0);
  const double ss_tot = y2 - n * (ysum / n) * (ysum / n);
  const double r2 = ss_tot > 1e-14 * std::max(1.0, y2) ? 1.0 - ss_res / ss_tot : 1.0;

  NodeFit fit;
  fit.coeffs.assign(beta.begin(), beta.begin() + p);
  fit.r2 = r2;
  return fit;
}

void validate_fit_args(const PathEnsemble& paths, std::span<const double> targets,
                       const RegressionBasis& rb) {
  const std::size_t want = static_cast<std::size_t>(paths.n_common) * paths.n_particles;
  if (targets.size() != want) {
    throw std::invalid_argument("fit_conditional: expected " + std::to_string(want) +
                                " targets, got " + std::to_string(targets.size()));
  }
  if (!std::isfinite(rb.ridge_scale) || rb.ridge_scale < 0.0) {
    throw std::invalid_argument("fit_conditional: ridge_scale must be finite and >= 0");
  }
  if (rb.basis.size() > static_cast<std::size_t>(kMaxFeatures)) {
    throw std::invalid_argument("fit_conditional: basis exceeds the supported feature count");
  }
}

std::vector<CellSums> node_cells(const PathEnsemble& paths, int node,
                                 std::span<const double> targets) {
  std::vector<CellSums> cells(paths.n_common);
  for (int s = 0; s < paths.n_common; ++s) {
    cells[s] = cell_sums(paths.states(s, node),
                         targets.data() + static_cast<std::size_t>(s) * paths.n_particles);
  }
  return cells;
}

}  // namespace

NodeFit fit_conditional(const PathEnsemble& paths, int node, std::span<const double> targets,
                        const RegressionBasis& rb) {
  validate_fit_args(paths, targets, rb);
  if (node < 0 || node >= paths.grid.nodes()) {
    throw std::invalid_argument("fit_conditional: node out of range");
  }
  return fit_node(paths, node, targets, rb, node_cells(paths, node, targets));
}

std::vector<NodeFit> fit_all_nodes(const PathEnsemble& paths, std::span<const double> targets,
                                   const RegressionBasis& rb) {
  validate_fit_args(paths, targets, rb);
  const int nodes = paths.grid.nodes();
  std::vector<NodeFit> fits(nodes);

  // An exception may not escape the parallel region; carry the first one out
  // by hand so a collinear design stays a catchable error.
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nodes; ++k) {
    try {
      fits[k] = fit_node(paths, k, targets, rb, node_cells(paths, k, targets));
    } catch (...) {
#pragma omp critical(mfg_fit_all_nodes_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return fits;
}

}  // namespace mfg

#pragma once

#include <span>
#include <vector>

#include "mfg/features.hpp"
#include "mfg/paths.hpp"

namespace mfg {

struct RegressionBasis {
  FeatureBasis basis = FeatureBasis::standard();
  double ridge_scale = 1e-8;  // Tikhonov weight, scaled by the sample count
};

struct NodeFit {
  std::vector<double> coeffs;
  double r2 = 0.0;
};

/// Least-squares projection of `targets` (flat [scenario][particle]) on the
/// node's features, pooled across scenarios. The normal equations are built
/// from per-scenario power sums, so the cost per sample does not grow with
/// the basis size and the serial reference can cross-check the assembly.
NodeFit fit_conditional(const PathEnsemble& paths, int node, std::span<const double> targets,
                        const RegressionBasis& rb);

/// One fit per time node against the same target vector (the targets are
/// terminal quantities; conditioning on earlier nodes changes only the
/// features).
std::vector<NodeFit> fit_all_nodes(const PathEnsemble& paths, std::span<const double> targets,
                                   const RegressionBasis& rb);

}  // namespace mfg

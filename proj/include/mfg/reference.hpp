#pragma once

#include <span>

#include "mfg/conditional.hpp"
#include "mfg/measures.hpp"
#include "mfg/paths.hpp"

namespace mfg::reference {

/// Textbook single-thread versions of the hot kernels. Tests pin the
/// parallel kernels against these, and the bench tool sizes the speedup.
/// Same arithmetic order as the parallel propagation, so states match
/// bitwise; the regression assembles the Gram matrix sample by sample and
/// solves by Gaussian elimination, so coefficients match only to rounding.

PathEnsemble propagate(const ControlField& control, std::span<const double> init,
                       const NoiseEnsemble& noise, double sigma, double sigma_tilde,
                       int node_offset = 0);

NodeFit fit_conditional(const PathEnsemble& paths, int node, std::span<const double> targets,
                        const RegressionBasis& rb);

double wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

}  // namespace mfg::reference

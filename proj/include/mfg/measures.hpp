#pragma once

#include <span>
#include <vector>

namespace mfg {

struct Atom {
  double x;  // location
  double w;  // weight
};

struct CouplingAtom {
  double x;  // location in the first marginal
  double y;  // location in the second marginal
  double w;  // transported mass
};

/// Weighted atomic measure on the real line. Atoms are kept sorted by
/// location; weights are strictly positive and sum to one (validated to
/// 1e-12 with compensated summation).
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(std::vector<Atom> atoms);

  /// Uniform weights 1/n over the given sample points.
  static EmpiricalMeasure from_samples(std::span<const double> samples);

  static EmpiricalMeasure dirac(double x) { return from_samples({&x, 1}); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

  /// k-th raw moment, sum w_i x_i^k.
  double moment(int k) const;
  double mean() const { return moment(1); }
  double second_moment() const { return moment(2); }

 private:
  std::vector<Atom> atoms_;
};

/// Exact 2-Wasserstein distance between two atomic measures, via the
/// monotone (quantile) coupling, which is optimal on the line.
double wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// The monotone coupling itself: mass-ordered pairs (x, y, w) whose
/// transport cost reproduces wasserstein2(a, b)^2 exactly.
std::vector<CouplingAtom> monotone_coupling(const EmpiricalMeasure& a,
                                            const EmpiricalMeasure& b);

}  // namespace mfg

#include "mfg/measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfg {

namespace {

double kahan_weight_sum(const std::vector<Atom>& atoms) {
  double sum = 0.0, comp = 0.0;
  for (const Atom& a : atoms) {
    const double y = a.w - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// Sweeps the monotone coupling, emitting (x, y, mass) segments in quantile
// order. Shared by the distance and the explicit coupling so the two agree
// bit for bit.
template <typename Visit>
void sweep_monotone(const EmpiricalMeasure& a, const EmpiricalMeasure& b, Visit&& visit) {
  const auto& pa = a.atoms();
  const auto& pb = b.atoms();
  std::size_t i = 0, j = 0;
  double ra = pa[0].w, rb = pb[0].w;
  while (i < pa.size() && j < pb.size()) {
    const double m = std::min(ra, rb);
    visit(pa[i].x, pb[j].x, m);
    ra -= m;
    rb -= m;
    if (ra <= 0.0) {
      ++i;
      if (i < pa.size()) ra = pa[i].w;
    }
    if (rb <= 0.0) {
      ++j;
      if (j < pb.size()) rb = pb[j].w;
    }
  }
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("empirical measure needs at least one atom");
  for (const Atom& a : atoms_) {
    if (!std::isfinite(a.x)) throw std::invalid_argument("atom location must be finite");
    if (!(a.w > 0.0) || !std::isfinite(a.w))
      throw std::invalid_argument("atom weight must be finite and > 0");
  }
  if (std::abs(kahan_weight_sum(atoms_) - 1.0) > 1e-12)
    throw std::invalid_argument("atom weights must sum to 1");
  std::sort(atoms_.begin(), atoms_.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
}

EmpiricalMeasure EmpiricalMeasure::from_samples(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("cannot build a measure from zero samples");
  std::vector<Atom> atoms;
  atoms.reserve(samples.size());
  const double w = 1.0 / static_cast<double>(samples.size());
  for (double x : samples) atoms.push_back({x, w});
  return EmpiricalMeasure(std::move(atoms));
}

double EmpiricalMeasure::moment(int k) const {
  if (k < 0) throw std::invalid_argument("moment order must be >= 0");
  double sum = 0.0;
  for (const Atom& a : atoms_) {
    double p = 1.0;
    for (int i = 0; i < k; ++i) p *= a.x;
    sum += a.w * p;
  }
  return sum;
}

double wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  double cost = 0.0;
  sweep_monotone(a, b, [&](double x, double y, double m) {
    const double d = x - y;
    cost += m * d * d;
  });
  return std::sqrt(cost);
}

std::vector<CouplingAtom> monotone_coupling(const EmpiricalMeasure& a,
                                            const EmpiricalMeasure& b) {
  std::vector<CouplingAtom> pairs;
  pairs.reserve(a.size() + b.size());
  sweep_monotone(a, b, [&](double x, double y, double m) { pairs.push_back({x, y, m}); });
  return pairs;
}

}  // namespace mfg

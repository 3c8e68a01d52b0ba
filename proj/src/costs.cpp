#include "mfg/costs.hpp"

#include <cmath>
#include <stdexcept>

#include <omp.h>

#include "mfg/rng.hpp"

namespace mfg {

ScalarMap ScalarMap::linear(double slope) {
  return {[slope](double y) { return slope * y; }, std::abs(slope),
          "linear(" + std::to_string(slope) + ")"};
}

ScalarMap ScalarMap::tanh_map(double scale) {
  return {[scale](double y) { return scale * std::tanh(y); }, std::abs(scale),
          "tanh(" + std::to_string(scale) + ")"};
}

TerminalCost TerminalCost::quadratic(double a, ScalarMap psi) {
  if (!(a > 0.0)) throw std::invalid_argument("quadratic cost needs a > 0");
  if (!(psi.lipschitz >= 0.0) || !psi.f)
    throw std::invalid_argument("quadratic cost needs a kernel with a Lipschitz bound");
  TerminalCost c;
  c.c_g_ = std::max(2.0 * a, psi.lipschitz);
  c.family_ = "quadratic";
  c.data_ = QuadraticCost{a, std::move(psi)};
  return c;
}

TerminalCost TerminalCost::track_mean(double q, double q_bar, double s) {
  if (q < 0.0 || q_bar < 0.0 || s < 0.0)
    throw std::invalid_argument("track_mean cost needs q, q_bar, s >= 0");
  if (!(q + q_bar > 0.0)) throw std::invalid_argument("track_mean cost needs q + q_bar > 0");
  TerminalCost c;
  c.c_g_ = 2.0 * (q + q_bar) * (1.0 + s);
  c.family_ = "track_mean";
  c.data_ = TrackMeanCost{q, q_bar, s};
  return c;
}

TerminalCost TerminalCost::mean_square_distance() {
  TerminalCost c;
  c.c_g_ = 2.0;
  c.family_ = "mean_square_distance";
  c.data_ = MeanSquareDistanceCost{};
  return c;
}

TerminalCost TerminalCost::state_quadratic(double a) {
  if (!(a > 0.0)) throw std::invalid_argument("state_quadratic cost needs a > 0");
  TerminalCost c;
  c.c_g_ = 2.0 * a;
  c.family_ = "state_quadratic";
  c.data_ = StateQuadraticCost{a};
  return c;
}

TerminalCost TerminalCost::custom(CustomCost cc) {
  if (!cc.g || !cc.gx) throw std::invalid_argument("custom cost needs both g and g_x");
  if (!(cc.lipschitz > 0.0)) throw std::invalid_argument("custom cost needs a declared C_g > 0");
  TerminalCost c;
  c.c_g_ = cc.lipschitz;
  c.family_ = cc.label.empty() ? "custom" : cc.label;
  c.data_ = std::move(cc);
  return c;
}

double TerminalCost::g(double x, const EmpiricalMeasure& m) const {
  return std::visit(
      [&](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, QuadraticCost>) {
          double psi_int = 0.0;
          for (const Atom& a : m.atoms()) psi_int += a.w * d.psi.f(a.x);
          return d.a * x * x + x * psi_int;
        } else if constexpr (std::is_same_v<T, TrackMeanCost>) {
          const double dev = x - d.s * m.mean();
          return d.q * x * x + d.q_bar * dev * dev;
        } else if constexpr (std::is_same_v<T, MeanSquareDistanceCost>) {
          return x * x - 2.0 * x * m.mean() + m.second_moment();
        } else if constexpr (std::is_same_v<T, StateQuadraticCost>) {
          return d.a * x * x;
        } else {
          return d.g(x, m);
        }
      },
      data_);
}

double TerminalCost::gx(double x, const EmpiricalMeasure& m) const {
  if (const auto* cc = std::get_if<CustomCost>(&data_)) return cc->gx(x, m);
  double slope, offset;
  affine_gx_given(m, slope, offset);
  return slope * x + offset;
}

bool TerminalCost::affine_gx() const { return !std::holds_alternative<CustomCost>(data_); }

void TerminalCost::affine_gx_given(const EmpiricalMeasure& m, double& slope,
                                   double& offset) const {
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, QuadraticCost>) {
          slope = 2.0 * d.a;
          offset = 0.0;
          for (const Atom& a : m.atoms()) offset += a.w * d.psi.f(a.x);
        } else if constexpr (std::is_same_v<T, TrackMeanCost>) {
          slope = 2.0 * (d.q + d.q_bar);
          offset = -2.0 * d.q_bar * d.s * m.mean();
        } else if constexpr (std::is_same_v<T, MeanSquareDistanceCost>) {
          slope = 2.0;
          offset = -2.0 * m.mean();
        } else if constexpr (std::is_same_v<T, StateQuadraticCost>) {
          slope = 2.0 * d.a;
          offset = 0.0;
        } else {
          throw std::logic_error("custom costs have no affine g_x form");
        }
      },
      data_);
}

bool TerminalCost::quadratic_g() const { return !std::holds_alternative<CustomCost>(data_); }

void TerminalCost::quadratic_g_given(const EmpiricalMeasure& m, double& c2, double& c1,
                                     double& c0) const {
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, QuadraticCost>) {
          c2 = d.a;
          c1 = 0.0;
          for (const Atom& a : m.atoms()) c1 += a.w * d.psi.f(a.x);
          c0 = 0.0;
        } else if constexpr (std::is_same_v<T, TrackMeanCost>) {
          const double sm = d.s * m.mean();
          c2 = d.q + d.q_bar;
          c1 = -2.0 * d.q_bar * sm;
          c0 = d.q_bar * sm * sm;
        } else if constexpr (std::is_same_v<T, MeanSquareDistanceCost>) {
          c2 = 1.0;
          c1 = -2.0 * m.mean();
          c0 = m.second_moment();
        } else if constexpr (std::is_same_v<T, StateQuadraticCost>) {
          c2 = d.a;
          c1 = 0.0;
          c0 = 0.0;
        } else {
          throw std::logic_error("custom costs have no quadratic form");
        }
      },
      data_);
}

std::string assumption_name(Assumption a) {
  switch (a) {
    case Assumption::a1_lipschitz_x: return "lipschitz_x";
    case Assumption::a2_convex_x: return "convex_x";
    case Assumption::a3_lipschitz_m: return "lipschitz_m";
    case Assumption::a4_weak_monotone: return "weak_monotone";
    case Assumption::lasry_lions: return "lasry_lions";
  }
  return "?";
}

namespace {

constexpr double kProbeRange = 3.0;   // clouds and points live in [-R, R]
constexpr double kProbeTol = 1e-9;    // violations below this are noise
constexpr int kPermCouplings = 8;

double probe_u(std::uint64_t seed, std::uint32_t trial, std::uint32_t slot) {
  return uniform01(seed, Stream::probe, trial, slot);
}

int cloud_size(std::uint64_t seed, std::uint32_t trial, std::uint32_t slot) {
  return 2 + static_cast<int>(probe_u(seed, trial, slot) * 30.9999);
}

EmpiricalMeasure draw_cloud(std::uint64_t seed, std::uint32_t trial, std::uint32_t slot_base,
                            int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i)
    xs[i] = kProbeRange * (2.0 * probe_u(seed, trial, slot_base + i) - 1.0);
  return EmpiricalMeasure::from_samples(xs);
}

EmpiricalMeasure translate_cloud(const EmpiricalMeasure& m, double shift) {
  std::vector<Atom> atoms = m.atoms();
  for (Atom& a : atoms) a.x += shift;
  return EmpiricalMeasure(std::move(atoms));
}

// Mean coupling statistic of A4 along explicit pairs: positive means the
// monotonicity inequality holds for this coupling.
double coupling_statistic(const TerminalCost& cost, const std::vector<CouplingAtom>& pairs,
                          const EmpiricalMeasure& m, const EmpiricalMeasure& m_prime) {
  double stat = 0.0;
  for (const CouplingAtom& p : pairs)
    stat += p.w * (cost.gx(p.x, m) - cost.gx(p.y, m_prime)) * (p.x - p.y);
  return stat;
}

std::vector<CouplingAtom> permutation_coupling(const EmpiricalMeasure& m,
                                               const EmpiricalMeasure& m_prime,
                                               std::uint64_t seed, std::uint32_t trial,
                                               std::uint32_t slot_base) {
  const int n = static_cast<int>(m.size());
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(probe_u(seed, trial, slot_base + i) * (i + 0.9999));
    std::swap(perm[i], perm[j]);
  }
  std::vector<CouplingAtom> pairs(n);
  const double w = 1.0 / n;
  for (int i = 0; i < n; ++i) pairs[i] = {m.atoms()[i].x, m_prime.atoms()[perm[i]].x, w};
  return pairs;
}

double lasry_lions_statistic(const TerminalCost& cost, const EmpiricalMeasure& m,
                             const EmpiricalMeasure& m_prime) {
  double stat = 0.0;
  for (const Atom& a : m.atoms()) stat += a.w * (cost.g(a.x, m) - cost.g(a.x, m_prime));
  for (const Atom& a : m_prime.atoms()) stat += a.w * (cost.g(a.x, m_prime) - cost.g(a.x, m));
  return stat;
}

// One probe trial; returns the violation magnitude (0 when the assumption
// holds on this draw) and optionally captures the witnessing inputs.
double eval_trial(const TerminalCost& cost, Assumption which, std::uint64_t seed,
                  std::uint32_t trial, AssumptionWitness* witness) {
  switch (which) {
    case Assumption::a1_lipschitz_x: {
      const double x = kProbeRange * (2.0 * probe_u(seed, trial, 0) - 1.0);
      const double xp = kProbeRange * (2.0 * probe_u(seed, trial, 1) - 1.0);
      const EmpiricalMeasure m = draw_cloud(seed, trial, 100, cloud_size(seed, trial, 2));
      const double lhs = std::abs(cost.gx(x, m) - cost.gx(xp, m));
      const double v = lhs - cost.lipschitz_bound() * std::abs(x - xp);
      if (v > kProbeTol) {
        if (witness) *witness = {x, xp, m, std::nullopt, ""};
        return v;
      }
      return 0.0;
    }
    case Assumption::a2_convex_x: {
      const double x = kProbeRange * (2.0 * probe_u(seed, trial, 0) - 1.0);
      const double xp = kProbeRange * (2.0 * probe_u(seed, trial, 1) - 1.0);
      const EmpiricalMeasure m = draw_cloud(seed, trial, 100, cloud_size(seed, trial, 2));
      const double v = -(cost.gx(x, m) - cost.gx(xp, m)) * (x - xp);
      if (v > kProbeTol) {
        if (witness) *witness = {x, xp, m, std::nullopt, ""};
        return v;
      }
      return 0.0;
    }
    case Assumption::a3_lipschitz_m: {
      const double x = kProbeRange * (2.0 * probe_u(seed, trial, 0) - 1.0);
      const EmpiricalMeasure m = draw_cloud(seed, trial, 100, cloud_size(seed, trial, 2));
      // Every fourth draw probes a pure translation: the direction where the
      // W2 quotient is tight.
      EmpiricalMeasure mp = (trial % 4 == 0)
                                ? translate_cloud(m, 2.0 * probe_u(seed, trial, 3) - 1.0)
                                : draw_cloud(seed, trial, 200, cloud_size(seed, trial, 4));
      const double w2 = wasserstein2(m, mp);
      if (w2 < 1e-12) return 0.0;
      const double lhs = std::abs(cost.gx(x, m) - cost.gx(x, mp));
      const double v = lhs - cost.lipschitz_bound() * w2;
      if (v > kProbeTol) {
        if (witness) *witness = {x, 0.0, m, mp, ""};
        return v;
      }
      return 0.0;
    }
    case Assumption::a4_weak_monotone: {
      // Equal-size uniform clouds so that permutations are valid couplings.
      const int n = cloud_size(seed, trial, 0);
      const EmpiricalMeasure m = draw_cloud(seed, trial, 100, n);
      const EmpiricalMeasure mp = draw_cloud(seed, trial, 200, n);
      double worst = 0.0;
      std::string worst_tag;
      {
        const double stat = coupling_statistic(cost, monotone_coupling(m, mp), m, mp);
        if (-stat > worst) {
          worst = -stat;
          worst_tag = "quantile";
        }
      }
      for (int p = 0; p < kPermCouplings; ++p) {
        const auto pairs = permutation_coupling(m, mp, seed, trial, 300 + 64 * p);
        const double stat = coupling_statistic(cost, pairs, m, mp);
        if (-stat > worst) {
          worst = -stat;
          worst_tag = "permutation " + std::to_string(p);
        }
      }
      if (worst > kProbeTol) {
        if (witness) *witness = {0.0, 0.0, m, mp, worst_tag};
        return worst;
      }
      return 0.0;
    }
    case Assumption::lasry_lions: {
      const EmpiricalMeasure m = draw_cloud(seed, trial, 100, cloud_size(seed, trial, 0));
      const EmpiricalMeasure mp = draw_cloud(seed, trial, 200, cloud_size(seed, trial, 1));
      const double v = -lasry_lions_statistic(cost, m, mp);
      if (v > kProbeTol) {
        if (witness) *witness = {0.0, 0.0, m, mp, ""};
        return v;
      }
      return 0.0;
    }
  }
  return 0.0;
}

}  // namespace

AssumptionReport check_assumption(const TerminalCost& cost, Assumption which,
                                  std::int64_t trials, std::uint64_t seed) {
  if (trials <= 0) throw std::invalid_argument("assumption check needs trials > 0");
  std::vector<double> violations(static_cast<std::size_t>(trials), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < trials; ++t)
    violations[static_cast<std::size_t>(t)] =
        eval_trial(cost, which, seed, static_cast<std::uint32_t>(t), nullptr);

  // Deterministic reduction: scan in trial order regardless of thread count.
  std::int64_t worst_trial = -1;
  double worst = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    if (violations[static_cast<std::size_t>(t)] > worst) {
      worst = violations[static_cast<std::size_t>(t)];
      worst_trial = t;
    }
  }

  AssumptionReport report{which, trials, worst, std::nullopt};
  if (worst_trial >= 0) {
    AssumptionWitness w;
    eval_trial(cost, which, seed, static_cast<std::uint32_t>(worst_trial), &w);
    report.witness = std::move(w);
  }
  return report;
}

double lipschitz_estimate(const TerminalCost& cost, std::int64_t trials, std::uint64_t seed) {
  if (trials <= 0) throw std::invalid_argument("lipschitz estimate needs trials > 0");
  std::vector<double> quotients(static_cast<std::size_t>(trials), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto trial = static_cast<std::uint32_t>(t);
    double q = 0.0;
    const double x = kProbeRange * (2.0 * probe_u(seed, trial, 0) - 1.0);
    const double xp = kProbeRange * (2.0 * probe_u(seed, trial, 1) - 1.0);
    const EmpiricalMeasure m = draw_cloud(seed, trial, 100, cloud_size(seed, trial, 2));
    if (std::abs(x - xp) > 1e-12)
      q = std::abs(cost.gx(x, m) - cost.gx(xp, m)) / std::abs(x - xp);
    EmpiricalMeasure mp = (trial % 4 == 0)
                              ? translate_cloud(m, 2.0 * probe_u(seed, trial, 3) - 1.0)
                              : draw_cloud(seed, trial, 200, cloud_size(seed, trial, 4));
    const double w2 = wasserstein2(m, mp);
    if (w2 > 1e-12) q = std::max(q, std::abs(cost.gx(x, m) - cost.gx(x, mp)) / w2);
    quotients[static_cast<std::size_t>(t)] = q;
  }
  double worst = 0.0;
  for (double q : quotients) worst = std::max(worst, q);
  return worst;
}

}  // namespace mfg

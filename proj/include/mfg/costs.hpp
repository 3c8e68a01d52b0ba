#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "mfg/measures.hpp"

namespace mfg {

/// Named scalar map with a declared Lipschitz bound, used as the interaction
/// kernel of the quadratic family.
struct ScalarMap {
  std::function<double(double)> f;
  double lipschitz;
  std::string name;

  static ScalarMap linear(double slope);        // y -> slope * y
  static ScalarMap tanh_map(double scale);      // y -> scale * tanh(y)
};

// g(x, m) = a x^2 + x * \int psi dm  (the measure-only additive term is zero)
struct QuadraticCost {
  double a;
  ScalarMap psi;
};

// g(x, m) = q x^2 + q_bar (x - s * mean(m))^2
struct TrackMeanCost {
  double q, q_bar, s;
};

// g(x, m) = \int (x - y)^2 dm(y)
struct MeanSquareDistanceCost {};

// g(x, m) = a x^2
struct StateQuadraticCost {
  double a;
};

// User-supplied g and g_x with a declared Lipschitz bound the checks trust.
struct CustomCost {
  std::function<double(double, const EmpiricalMeasure&)> g;
  std::function<double(double, const EmpiricalMeasure&)> gx;
  double lipschitz;
  std::string label;
};

/// Terminal cost g(x, m) with its x-derivative and a declared constant C_g
/// bounding the Lipschitz behaviour of g_x in x and (for the measure
/// argument) in 2-Wasserstein distance.
class TerminalCost {
 public:
  static TerminalCost quadratic(double a, ScalarMap psi);
  static TerminalCost track_mean(double q, double q_bar, double s);
  static TerminalCost mean_square_distance();
  static TerminalCost state_quadratic(double a);
  static TerminalCost custom(CustomCost c);

  double g(double x, const EmpiricalMeasure& m) const;
  double gx(double x, const EmpiricalMeasure& m) const;
  double lipschitz_bound() const { return c_g_; }
  const std::string& family() const { return family_; }

  /// For the built-in families g_x(x, m) = slope * x + offset(m); the frozen
  /// per-scenario form lets hot loops avoid re-reducing the measure.
  bool affine_gx() const;
  void affine_gx_given(const EmpiricalMeasure& m, double& slope, double& offset) const;

  /// Built-in families are quadratic in x once the measure is fixed:
  /// g(x, m) = c2 x^2 + c1 x + c0. Same purpose as the affine gradient form.
  bool quadratic_g() const;
  void quadratic_g_given(const EmpiricalMeasure& m, double& c2, double& c1, double& c0) const;

  const std::variant<QuadraticCost, TrackMeanCost, MeanSquareDistanceCost, StateQuadraticCost,
                     CustomCost>&
  data() const {
    return data_;
  }

 private:
  TerminalCost() = default;
  std::variant<QuadraticCost, TrackMeanCost, MeanSquareDistanceCost, StateQuadraticCost,
               CustomCost>
      data_;
  double c_g_ = 0.0;
  std::string family_;
};

/// The structural conditions probed on a cost family. The first four are the
/// well-posedness package (Lipschitz in x, convexity in x, Lipschitz in the
/// measure, weak mean monotonicity over couplings); lasry_lions is the
/// stronger order condition that together with convexity implies the weak
/// one but is not implied by it.
enum class Assumption { a1_lipschitz_x, a2_convex_x, a3_lipschitz_m, a4_weak_monotone, lasry_lions };

std::string assumption_name(Assumption a);

struct AssumptionWitness {
  double x = 0.0, x_prime = 0.0;
  std::optional<EmpiricalMeasure> m, m_prime;
  std::string coupling;  // which coupling exposed it, when relevant
};

struct AssumptionReport {
  Assumption which;
  std::int64_t trials = 0;
  // 0 means no violation above the 1e-9 probe tolerance; otherwise the worst
  // violation magnitude found.
  double worst_violation = 0.0;
  std::optional<AssumptionWitness> witness;
  bool passed() const { return worst_violation == 0.0; }
};

/// Randomized probe of one assumption: `trials` draws of points/clouds on a
/// compact range, deterministic in `seed`. A4 tests the quantile coupling
/// plus eight random permutation couplings per draw.
AssumptionReport check_assumption(const TerminalCost& cost, Assumption which,
                                  std::int64_t trials, std::uint64_t seed);

/// Max difference quotient of g_x over sampled pairs, in x and in the
/// measure argument (the latter against W2); a sup-estimate of the constant
/// the family declares.
double lipschitz_estimate(const TerminalCost& cost, std::int64_t trials, std::uint64_t seed);

}  // namespace mfg

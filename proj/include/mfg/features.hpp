#pragma once

#include <span>
#include <string>
#include <vector>

namespace mfg {

/// Scalar features of (x, mbar, m2): the particle state, the conditional
/// mean and the conditional second moment of its cloud. Controls and fitted
/// adjoint fields are linear combinations of these.
enum class Feature { one, x, x2, mbar, m2, x_mbar };

class FeatureBasis {
 public:
  explicit FeatureBasis(std::vector<Feature> features);

  /// Parses names: "1", "x", "x2", "mbar", "m2", "x_mbar".
  static FeatureBasis parse(const std::vector<std::string>& names);
  static FeatureBasis standard();  // {1, x, mbar}
  static FeatureBasis extended();  // all six features

  std::size_t size() const { return features_.size(); }
  const std::vector<Feature>& features() const { return features_; }
  std::vector<std::string> names() const;
  bool operator==(const FeatureBasis& other) const = default;

  void evaluate(double x, double mbar, double m2, std::span<double> out) const;
  double combine(std::span<const double> coeffs, double x, double mbar, double m2) const;

  /// Analytic partial derivatives of a fitted combination; used for
  /// Lipschitz read-outs of decoupling fields.
  double d_dx(std::span<const double> coeffs, double x, double mbar) const;
  double d_dmbar(std::span<const double> coeffs, double x) const;

  /// Monomial split phi(x, mbar, m2) = x^degree * carrier(mbar, m2); lets
  /// regression kernels collapse per-particle work into power sums.
  static int x_degree(Feature f);
  static double carrier(Feature f, double mbar, double m2);

 private:
  std::vector<Feature> features_;
};

}  // namespace mfg

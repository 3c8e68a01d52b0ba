#include "mfg/features.hpp"

#include <stdexcept>

namespace mfg {

FeatureBasis::FeatureBasis(std::vector<Feature> features) : features_(std::move(features)) {
  if (features_.empty()) throw std::invalid_argument("feature basis must not be empty");
  for (std::size_t i = 0; i < features_.size(); ++i)
    for (std::size_t j = i + 1; j < features_.size(); ++j)
      if (features_[i] == features_[j])
        throw std::invalid_argument("feature basis contains a duplicate feature");
}

FeatureBasis FeatureBasis::parse(const std::vector<std::string>& names) {
  std::vector<Feature> fs;
  fs.reserve(names.size());
  for (const std::string& n : names) {
    if (n == "1")
      fs.push_back(Feature::one);
    else if (n == "x")
      fs.push_back(Feature::x);
    else if (n == "x2")
      fs.push_back(Feature::x2);
    else if (n == "mbar")
      fs.push_back(Feature::mbar);
    else if (n == "m2")
      fs.push_back(Feature::m2);
    else if (n == "x_mbar")
      fs.push_back(Feature::x_mbar);
    else
      throw std::invalid_argument("unknown feature name '" + n +
                                  "' (expected one of: 1, x, x2, mbar, m2, x_mbar)");
  }
  return FeatureBasis(std::move(fs));
}

FeatureBasis FeatureBasis::standard() {
  return FeatureBasis({Feature::one, Feature::x, Feature::mbar});
}

FeatureBasis FeatureBasis::extended() {
  return FeatureBasis(
      {Feature::one, Feature::x, Feature::x2, Feature::mbar, Feature::m2, Feature::x_mbar});
}

std::vector<std::string> FeatureBasis::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (Feature f : features_) {
    switch (f) {
      case Feature::one: out.push_back("1"); break;
      case Feature::x: out.push_back("x"); break;
      case Feature::x2: out.push_back("x2"); break;
      case Feature::mbar: out.push_back("mbar"); break;
      case Feature::m2: out.push_back("m2"); break;
      case Feature::x_mbar: out.push_back("x_mbar"); break;
    }
  }
  return out;
}

void FeatureBasis::evaluate(double x, double mbar, double m2, std::span<double> out) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    switch (features_[i]) {
      case Feature::one: out[i] = 1.0; break;
      case Feature::x: out[i] = x; break;
      case Feature::x2: out[i] = x * x; break;
      case Feature::mbar: out[i] = mbar; break;
      case Feature::m2: out[i] = m2; break;
      case Feature::x_mbar: out[i] = x * mbar; break;
    }
  }
}

double FeatureBasis::combine(std::span<const double> coeffs, double x, double mbar,
                             double m2) const {
  double v = 0.0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    switch (features_[i]) {
      case Feature::one: v += coeffs[i]; break;
      case Feature::x: v += coeffs[i] * x; break;
      case Feature::x2: v += coeffs[i] * x * x; break;
      case Feature::mbar: v += coeffs[i] * mbar; break;
      case Feature::m2: v += coeffs[i] * m2; break;
      case Feature::x_mbar: v += coeffs[i] * x * mbar; break;
    }
  }
  return v;
}

double FeatureBasis::d_dx(std::span<const double> coeffs, double x, double mbar) const {
  double v = 0.0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    switch (features_[i]) {
      case Feature::x: v += coeffs[i]; break;
      case Feature::x2: v += 2.0 * coeffs[i] * x; break;
      case Feature::x_mbar: v += coeffs[i] * mbar; break;
      default: break;
    }
  }
  return v;
}

double FeatureBasis::d_dmbar(std::span<const double> coeffs, double x) const {
  double v = 0.0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    switch (features_[i]) {
      case Feature::mbar: v += coeffs[i]; break;
      case Feature::x_mbar: v += coeffs[i] * x; break;
      default: break;
    }
  }
  return v;
}

int FeatureBasis::x_degree(Feature f) {
  switch (f) {
    case Feature::x:
    case Feature::x_mbar: return 1;
    case Feature::x2: return 2;
    default: return 0;
  }
}

double FeatureBasis::carrier(Feature f, double mbar, double m2) {
  switch (f) {
    case Feature::mbar: return mbar;
    case Feature::m2: return m2;
    case Feature::x_mbar: return mbar;
    default: return 1.0;
  }
}

}  // namespace mfg

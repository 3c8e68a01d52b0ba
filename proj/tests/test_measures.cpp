#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mfg/measures.hpp"
#include "mfg/rng.hpp"

using namespace mfg;

namespace {

// Exact W2 between equal-weight clouds of the same small size: minimize the
// assignment cost over all permutations. On the line the optimum is the
// sorted pairing, but the brute force does not assume that.
double brute_force_w2(std::vector<double> a, std::vector<double> b) {
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[perm[i]];
      cost += d * d;
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("dirac distance is the gap between the points") {
  CHECK(wasserstein2(EmpiricalMeasure::dirac(0.0), EmpiricalMeasure::dirac(3.0)) ==
        doctest::Approx(3.0));
  CHECK(wasserstein2(EmpiricalMeasure::dirac(1.5), EmpiricalMeasure::dirac(1.5)) ==
        doctest::Approx(0.0));
}

TEST_CASE("two-atom example with explicit coupling") {
  const EmpiricalMeasure a({{0.0, 0.5}, {1.0, 0.5}});
  const EmpiricalMeasure b({{2.0, 0.5}, {3.0, 0.5}});
  CHECK(wasserstein2(a, b) == doctest::Approx(2.0));

  const auto plan = monotone_coupling(a, b);
  REQUIRE(plan.size() == 2);
  CHECK(plan[0].x == doctest::Approx(0.0));
  CHECK(plan[0].y == doctest::Approx(2.0));
  CHECK(plan[0].w == doctest::Approx(0.5));
  CHECK(plan[1].x == doctest::Approx(1.0));
  CHECK(plan[1].y == doctest::Approx(3.0));
  CHECK(plan[1].w == doctest::Approx(0.5));
}

TEST_CASE("coupling cost reproduces the distance") {
  const EmpiricalMeasure a({{-1.0, 0.25}, {0.0, 0.5}, {2.0, 0.25}});
  const EmpiricalMeasure b({{0.5, 0.6}, {1.5, 0.4}});
  const auto plan = monotone_coupling(a, b);
  double mass = 0, cost = 0;
  for (const auto& c : plan) {
    mass += c.w;
    cost += c.w * (c.x - c.y) * (c.x - c.y);
  }
  CHECK(mass == doctest::Approx(1.0));
  CHECK(std::sqrt(cost) == doctest::Approx(wasserstein2(a, b)));
}

TEST_CASE("metric properties on random clouds") {
  const std::uint64_t seed = 2024;
  for (std::uint32_t trial = 0; trial < 50; ++trial) {
    std::vector<double> xs(8), ys(8), zs(8);
    for (std::uint32_t j = 0; j < 8; ++j) {
      xs[j] = 2.0 * normal01(seed, Stream::probe, trial, j, 0);
      ys[j] = 1.0 + normal01(seed, Stream::probe, trial, j, 1);
      zs[j] = -0.5 + 3.0 * normal01(seed, Stream::probe, trial, j, 2);
    }
    const auto a = EmpiricalMeasure::from_samples(xs);
    const auto b = EmpiricalMeasure::from_samples(ys);
    const auto c = EmpiricalMeasure::from_samples(zs);
    const double ab = wasserstein2(a, b);
    const double ba = wasserstein2(b, a);
    const double ac = wasserstein2(a, c);
    const double cb = wasserstein2(c, b);
    CHECK(ab == doctest::Approx(ba));
    CHECK(ab >= 0.0);
    CHECK(ab <= ac + cb + 1e-12);
    CHECK(wasserstein2(a, a) == doctest::Approx(0.0));
  }
}

TEST_CASE("translation shifts the distance exactly") {
  std::vector<double> xs(16);
  for (std::uint32_t j = 0; j < 16; ++j) xs[j] = normal01(5, Stream::probe, 99, j);
  std::vector<double> shifted = xs;
  for (double& v : shifted) v += 2.5;
  CHECK(wasserstein2(EmpiricalMeasure::from_samples(xs),
                     EmpiricalMeasure::from_samples(shifted)) == doctest::Approx(2.5));
}

TEST_CASE("matches brute-force assignment on small equal-weight clouds") {
  const std::uint64_t seed = 77;
  for (std::uint32_t trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 5;  // up to 6 atoms
    std::vector<double> xs(n), ys(n);
    for (std::uint32_t j = 0; j < n; ++j) {
      xs[j] = 3.0 * (uniform01(seed, Stream::probe, trial, j, 0) - 0.5);
      ys[j] = 3.0 * (uniform01(seed, Stream::probe, trial, j, 1) - 0.5);
    }
    const double fast = wasserstein2(EmpiricalMeasure::from_samples(xs),
                                     EmpiricalMeasure::from_samples(ys));
    std::sort(xs.begin(), xs.end());
    CHECK(fast == doctest::Approx(brute_force_w2(xs, ys)).epsilon(1e-9));
  }
}

TEST_CASE("atoms are sorted and duplicate locations merged consistently") {
  const EmpiricalMeasure m({{2.0, 0.25}, {-1.0, 0.5}, {2.0, 0.25}});
  const auto& atoms = m.atoms();
  for (std::size_t i = 1; i < atoms.size(); ++i) CHECK(atoms[i - 1].x <= atoms[i].x);
  CHECK(m.mean() == doctest::Approx(0.5));
  CHECK(m.second_moment() == doctest::Approx(0.5 * 1.0 + 0.5 * 4.0));
}

TEST_CASE("moments of a uniform cloud") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto m = EmpiricalMeasure::from_samples(xs);
  CHECK(m.moment(0) == doctest::Approx(1.0));
  CHECK(m.mean() == doctest::Approx(2.5));
  CHECK(m.second_moment() == doctest::Approx(7.5));
  CHECK(m.moment(3) == doctest::Approx(25.0));
}

TEST_CASE("invalid weights are rejected") {
  CHECK_THROWS_AS(EmpiricalMeasure({{0.0, 0.5}, {1.0, 0.6}}), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalMeasure({{0.0, -0.5}, {1.0, 1.5}}), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalMeasure({}), std::invalid_argument);
}

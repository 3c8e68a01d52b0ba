#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <set>

#include "mfg/rng.hpp"

using namespace mfg;

TEST_CASE("philox known-answer vectors") {
  // Reference vectors for Philox-4x32 with 10 rounds.
  const std::array<std::uint32_t, 4> zeros{0, 0, 0, 0};
  const auto r0 = philox4x32(0, zeros);
  CHECK(r0[0] == 0x6627e8d5u);
  CHECK(r0[1] == 0xe169c58du);
  CHECK(r0[2] == 0xbc57ac4cu);
  CHECK(r0[3] == 0x9b00dbd8u);

  const std::array<std::uint32_t, 4> ones{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu};
  const auto r1 = philox4x32(0xffffffffffffffffull, ones);
  CHECK(r1[0] == 0x408f276du);
  CHECK(r1[1] == 0x41c83b0eu);
  CHECK(r1[2] == 0xa20bc7c6u);
  CHECK(r1[3] == 0x6d5451fdu);

  // Counter from pi digits, key {0xa4093822, 0x299f31d0} packed low/high.
  const std::array<std::uint32_t, 4> pi{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u};
  const auto r2 = philox4x32(0x299f31d0a4093822ull, pi);
  CHECK(r2[0] == 0xd16cfe09u);
  CHECK(r2[1] == 0x94fdccebu);
  CHECK(r2[2] == 0x5001e420u);
  CHECK(r2[3] == 0x24126ea1u);
}

TEST_CASE("draws are pure functions of (seed, stream, counter)") {
  const double a = normal01(42, Stream::idio_noise, 3, 7, 11);
  const double b = normal01(42, Stream::idio_noise, 3, 7, 11);
  CHECK(a == b);

  // Any coordinate change or stream change lands on a different block.
  CHECK(normal01(42, Stream::idio_noise, 3, 7, 12) != a);
  CHECK(normal01(42, Stream::common_noise, 3, 7, 11) != a);
  CHECK(normal01(43, Stream::idio_noise, 3, 7, 11) != a);
}

TEST_CASE("uniforms stay inside the open unit interval") {
  for (std::uint32_t i = 0; i < 20000; ++i) {
    const double u = uniform01(7, Stream::probe, i, 0);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform moments match U(0,1)") {
  const int n = 200000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(123, Stream::probe, static_cast<std::uint32_t>(i), 1);
    s1 += u;
    s2 += u * u;
  }
  // Standard errors: sqrt(1/12/n) for the mean, similar scale for the raw
  // second moment; gate at five sigma.
  CHECK(std::abs(s1 / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(s2 / n - 1.0 / 3.0) < 5.0 * std::sqrt(4.0 / 45.0 / n));
}

TEST_CASE("normal moments match N(0,1)") {
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = normal01(987, Stream::probe, static_cast<std::uint32_t>(i), 2);
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(static_cast<double>(n)));
  // Var(z^2) = 2, Var(z^4) = 96.
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("distinct counters give distinct outputs") {
  std::set<std::uint64_t> seen;
  for (std::uint32_t i = 0; i < 4096; ++i) {
    const auto r = philox4x32(1, {i, 0, 0, 0});
    seen.insert((static_cast<std::uint64_t>(r[0]) << 32) | r[1]);
  }
  CHECK(seen.size() == 4096);
}

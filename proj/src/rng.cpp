#include "mfg/rng.hpp"

#include <cmath>
#include <numbers>

namespace mfg {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t v = (static_cast<std::uint64_t>(hi) << 32) | lo;
  // 53 significant bits, shifted into the open interval (0, 1).
  return (static_cast<double>(v >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::uint64_t seed,
                                        const std::array<std::uint32_t, 4>& counter) {
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
  std::array<std::uint32_t, 4> x = counter;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, x[0], hi0, lo0);
    mulhilo(kMul1, x[2], hi1, lo1);
    x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return x;
}

double uniform01(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b,
                 std::uint32_t c) {
  const auto x = philox4x32(seed, {static_cast<std::uint32_t>(stream), a, b, c});
  return to_unit(x[0], x[1]);
}

double normal01(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b,
                std::uint32_t c) {
  const auto x = philox4x32(seed, {static_cast<std::uint32_t>(stream), a, b, c});
  const double u1 = to_unit(x[0], x[1]);
  const double u2 = to_unit(x[2], x[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mfg

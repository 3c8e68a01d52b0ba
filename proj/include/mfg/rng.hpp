#pragma once

#include <array>
#include <cstdint>

namespace mfg {

/// Counter-based generator (Philox-4x32, 10 rounds). Every draw is a pure
/// function of (seed, counter), so a sample is reproducible regardless of
/// thread count, and resizing one ensemble dimension never perturbs draws
/// made for another.
std::array<std::uint32_t, 4> philox4x32(std::uint64_t seed,
                                        const std::array<std::uint32_t, 4>& counter);

/// Stream tags keep unrelated sampling purposes on disjoint counters.
enum class Stream : std::uint32_t {
  idio_noise = 1,    // per (scenario, particle, step)
  common_noise = 2,  // per (scenario, step); independent of particle count
  initial = 3,       // per (scenario, particle)
  probe = 4,         // assumption-check draws, per (trial, slot)
  perturbation = 5,  // diagnostic feedback perturbations
};

/// Uniform draw in the open interval (0, 1).
double uniform01(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b,
                 std::uint32_t c = 0);

/// Standard normal draw (Box-Muller on two uniforms from one counter block).
double normal01(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b,
                std::uint32_t c = 0);

}  // namespace mfg

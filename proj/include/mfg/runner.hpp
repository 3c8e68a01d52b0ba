#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "mfg/config.hpp"

namespace mfg {

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads;
  std::optional<std::string> output_dir_override;
  bool override_assumptions = false;
  bool export_paths = false;
};

// Shared by the CLI and the tests that drive it.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;       // mapped by the CLI from ConfigError
inline constexpr int kExitAssumptions = 3;  // structural checks failed, no override
inline constexpr int kExitNotConverged = 4;
inline constexpr int kExitInternal = 5;     // mapped by the CLI from anything else

/// Checks the structural conditions on the configured cost and prints one
/// line per condition. Exit: kExitAssumptions when a core condition fails
/// and no override is set.
int run_check(const RunOptions& opts, std::ostream& out);

/// Full pipeline: gate on the structural conditions, solve, run the
/// configured diagnostic suites, write the artifact set. Every artifact
/// except manifest.json is byte-stable for a fixed config and seed.
int run_solve(const RunOptions& opts, std::ostream& out);

/// Solves from several constant feedbacks and reports how far apart the
/// resulting equilibria are.
int run_probe_uniqueness(const RunOptions& opts, std::ostream& out);

/// Times the parallel kernels against their serial references.
int run_bench(std::ostream& out);

}  // namespace mfg

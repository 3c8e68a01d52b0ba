#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfg/config.hpp"
#include "mfg/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string out_dir;
  bool override_assumptions = false;
  bool export_paths = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out) {
  cmd->add_option("--config", args.config_path, "experiment configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->trigger_on_parse()
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--threads", args.threads, "worker thread count")
      ->check(CLI::PositiveNumber);
  if (with_out) {
    cmd->add_option("--out", args.out_dir, "override the config output directory");
  }
  cmd->add_flag("--override-assumptions", args.override_assumptions,
                "solve even when the structural checks fail");
}

mfg::RunOptions to_options(const CommonArgs& args) {
  mfg::RunOptions opts;
  opts.config_path = args.config_path;
  if (args.seed_set) opts.seed_override = args.seed;
  if (args.threads > 0) opts.threads = args.threads;
  if (!args.out_dir.empty()) opts.output_dir_override = args.out_dir;
  opts.override_assumptions = args.override_assumptions;
  opts.export_paths = args.export_paths;
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"particle solver for mean field games with common noise"};
  app.require_subcommand(1);

  CommonArgs check_args;
  CLI::App* check = app.add_subcommand("check", "run the structural condition checks");
  add_common(check, check_args, false);

  CommonArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve", "solve the game and write artifacts");
  add_common(solve, solve_args, true);
  solve->add_flag("--export-paths", solve_args.export_paths,
                  "also write the full particle paths (large)");

  CommonArgs probe_args;
  CLI::App* probe =
      app.add_subcommand("probe-uniqueness", "compare equilibria from spread-out starts");
  add_common(probe, probe_args, true);

  CLI::App* bench = app.add_subcommand("bench", "time the parallel kernels against the serial references");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (check->parsed()) return mfg::run_check(to_options(check_args), std::cout);
    if (solve->parsed()) return mfg::run_solve(to_options(solve_args), std::cout);
    if (probe->parsed()) return mfg::run_probe_uniqueness(to_options(probe_args), std::cout);
    if (bench->parsed()) return mfg::run_bench(std::cout);
  } catch (const mfg::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return mfg::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mfg::kExitInternal;
  }
  return mfg::kExitInternal;
}

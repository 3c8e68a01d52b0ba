#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_work;

struct RunResult {
  int exit_code;
  std::string output;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "cannot open " << p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(bool(out));
  out << text;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = g_work / ("log_" + std::to_string(counter++) + ".txt");
  const std::string cmd = g_cli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

// Small and quick to solve: no mean coupling in the cost, loose tolerance.
std::string base_config(const std::string& out_dir, const std::string& cost) {
  return std::string("{\n") +
         "  \"seed\": 3,\n" +
         "  \"model\": {\n" +
         "    \"sigma\": 1.0, \"sigma_tilde\": 0.3, \"horizon\": 0.5,\n" +
         "    \"cost\": " + cost + ",\n" +
         "    \"initial\": {\"type\": \"gaussian\", \"mean\": 0.5, \"stddev\": 1.0}\n" +
         "  },\n" +
         "  \"discretization\": {\"steps\": 10, \"n_common\": 4, \"n_particles\": 80},\n" +
         "  \"solver\": {\"tol\": 0.002, \"max_iter\": 60},\n" +
         "  \"diagnostics\": {\"suites\": [\"assumptions\"], \"assumption_trials\": 300},\n" +
         "  \"output_dir\": \"" + out_dir + "\"\n" +
         "}\n";
}

const std::string kGoodCost = R"({"family": "state_quadratic", "a": 1.0})";
// Decreasing coupling through the mean: fails the monotonicity condition.
const std::string kBadCost =
    R"({"family": "quadratic", "a": 0.5, "psi": {"type": "linear", "slope": -2.0}})";

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = g_work / name;
  spit(p, text);
  return p;
}

}  // namespace

TEST_CASE("solve writes the artifact set and exits cleanly") {
  const fs::path out = g_work / "solve_basic";
  const auto cfg = write_config("good.json", base_config(out.string(), kGoodCost));
  const RunResult r = run_cli("solve --config " + cfg.string());

  CAPTURE(r.output);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("solve converged") != std::string::npos);
  for (const char* name :
       {"config.json", "control.json", "flow.csv", "convergence.csv", "reports.json",
        "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
  CHECK(!fs::exists(out / "paths.csv"));

  const auto reports = nlohmann::json::parse(slurp(out / "reports.json"));
  CHECK(reports.at("converged").get<bool>());
  CHECK(reports.at("seed").get<std::uint64_t>() == 3);
  CHECK(reports.at("diagnostics").at("cost").at("value").is_number());
  CHECK(reports.at("intervals").is_array());

  const auto echoed = nlohmann::json::parse(slurp(out / "config.json"));
  CHECK(echoed.at("seed").get<std::uint64_t>() == 3);

  const auto control = nlohmann::json::parse(slurp(out / "control.json"));
  CHECK(control.at("grid").at("steps").get<int>() == 10);
  CHECK(control.at("coeffs").size() == 11);

  CHECK(slurp(out / "flow.csv").rfind("scenario,node,time,mbar,m2\n", 0) == 0);
}

TEST_CASE("artifacts are byte-identical across thread counts") {
  const fs::path out1 = g_work / "threads_1";
  const fs::path out3 = g_work / "threads_3";
  const auto cfg = write_config("good_threads.json", base_config(out1.string(), kGoodCost));
  const RunResult r1 = run_cli("solve --config " + cfg.string() + " --threads 1");
  const RunResult r3 =
      run_cli("solve --config " + cfg.string() + " --threads 3 --out " + out3.string());
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r3.exit_code == 0);

  for (const char* name :
       {"config.json", "control.json", "flow.csv", "convergence.csv", "reports.json"}) {
    CHECK_MESSAGE(slurp(out1 / name) == slurp(out3 / name), name);
  }
  // Only the manifest is allowed to differ (wall times, thread count).
  const auto m1 = nlohmann::json::parse(slurp(out1 / "manifest.json"));
  const auto m3 = nlohmann::json::parse(slurp(out3 / "manifest.json"));
  CHECK(m1.at("threads").get<int>() == 1);
  CHECK(m3.at("threads").get<int>() == 3);
  CHECK(m1.at("artifacts") == m3.at("artifacts"));
}

TEST_CASE("the seed override lands in the echoed config and changes the draw") {
  const fs::path base = g_work / "threads_1";  // reuse the run above
  REQUIRE(fs::exists(base / "flow.csv"));
  const fs::path out = g_work / "seeded";
  const auto cfg = write_config("good_seed.json", base_config(base.string(), kGoodCost));
  const RunResult r =
      run_cli("solve --config " + cfg.string() + " --seed 9 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const auto echoed = nlohmann::json::parse(slurp(out / "config.json"));
  CHECK(echoed.at("seed").get<std::uint64_t>() == 9);
  CHECK(slurp(out / "flow.csv") != slurp(base / "flow.csv"));
}

TEST_CASE("export-paths adds the per-particle states") {
  const fs::path out = g_work / "with_paths";
  const auto cfg = write_config("good_paths.json", base_config(out.string(), kGoodCost));
  const RunResult r = run_cli("solve --config " + cfg.string() + " --export-paths");
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(out / "paths.csv"));
  const std::string paths = slurp(out / "paths.csv");
  CHECK(paths.rfind("scenario,node,time,particle,x\n", 0) == 0);
  // 4 scenarios x 11 nodes x 80 particles plus the header.
  CHECK(std::count(paths.begin(), paths.end(), '\n') == 4 * 11 * 80 + 1);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  const auto& arts = manifest.at("artifacts");
  CHECK(std::find(arts.begin(), arts.end(), nlohmann::json("paths.csv")) != arts.end());
}

TEST_CASE("check reports the structural conditions") {
  const auto good = write_config("check_good.json", base_config("unused_out", kGoodCost));
  const RunResult ok = run_cli("check --config " + good.string());
  CAPTURE(ok.output);
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("all core conditions hold") != std::string::npos);

  const auto bad = write_config("check_bad.json", base_config("unused_out", kBadCost));
  const RunResult fail = run_cli("check --config " + bad.string());
  CAPTURE(fail.output);
  CHECK(fail.exit_code == 3);
  CHECK(fail.output.find("FAIL") != std::string::npos);
  CHECK(fail.output.find("core conditions failed") != std::string::npos);

  const RunResult overridden =
      run_cli("check --config " + bad.string() + " --override-assumptions");
  CHECK(overridden.exit_code == 0);
  CHECK(overridden.output.find("override set") != std::string::npos);
}

TEST_CASE("solve refuses a cost that fails the structural gate") {
  const fs::path out = g_work / "gated";
  const auto bad = write_config("solve_bad.json", base_config(out.string(), kBadCost));
  const RunResult blocked = run_cli("solve --config " + bad.string());
  CAPTURE(blocked.output);
  CHECK(blocked.exit_code == 3);
  CHECK(blocked.output.find("--override-assumptions") != std::string::npos);
  CHECK(!fs::exists(out / "reports.json"));

  const RunResult forced =
      run_cli("solve --config " + bad.string() + " --override-assumptions");
  CAPTURE(forced.output);
  // The gate is bypassed; the solve itself may or may not converge.
  CHECK((forced.exit_code == 0 || forced.exit_code == 4));
  CHECK(fs::exists(out / "reports.json"));
}

TEST_CASE("configuration problems exit with the config code") {
  const auto broken = write_config("broken.json", "{ this is not json\n");
  CHECK(run_cli("solve --config " + broken.string()).exit_code == 2);

  const auto bad_range = write_config(
      "bad_range.json", R"({"seed": 1, "model": {"sigma": -1}})");
  const RunResult r = run_cli("solve --config " + bad_range.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("model.sigma") != std::string::npos);

  // A missing file is caught by the argument parser, not the exit-code map.
  CHECK(run_cli("solve --config " + (g_work / "nope.json").string()).exit_code != 0);
  CHECK(run_cli("frobnicate").exit_code != 0);
}

TEST_CASE("probe-uniqueness writes its comparison") {
  const fs::path out = g_work / "probe";
  const auto cfg = write_config("probe.json", base_config(out.string(), kGoodCost));
  const RunResult r = run_cli("probe-uniqueness --config " + cfg.string());
  CAPTURE(r.output);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("max relative distance") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out / "uniqueness.json"));
  CHECK(j.at("all_converged").get<bool>());
  CHECK(j.at("starts").size() == 3);
  CHECK(j.at("pairwise").size() == 3);
  CHECK(j.at("max_relative").get<double>() >= 0.0);
}

TEST_CASE("bench compares the kernels against their references") {
  const RunResult r = run_cli("bench");
  CAPTURE(r.output);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("speedup") != std::string::npos);
  CHECK(r.output.find("propagate") != std::string::npos);
  CHECK(r.output.find("wasserstein2") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_runner <path-to-cli> [doctest args]\n");
    return 1;
  }
  g_cli = argv[1];
  g_work = fs::temp_directory_path() / "mfg_runner_work";
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  doctest::Context ctx(argc - 1, argv + 1);
  return ctx.run();
}

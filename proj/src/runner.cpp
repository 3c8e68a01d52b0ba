#include "mfg/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "mfg/diagnostics.hpp"
#include "mfg/parallel.hpp"
#include "mfg/reference.hpp"
#include "mfg/rng.hpp"

namespace mfg {

namespace {

using nlohmann::ordered_json;

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

struct Loaded {
  ExperimentConfig config;
  std::filesystem::path dir;
};

// The seed is part of the experiment's identity, so the override lands in the
// echoed config; where the artifacts go is not, so --out stays out of it.
Loaded load_with_overrides(const RunOptions& opts) {
  ExperimentConfig c = load_config(opts.config_path);
  if (opts.seed_override) c.seed = *opts.seed_override;
  std::filesystem::path dir =
      opts.output_dir_override ? std::filesystem::path(*opts.output_dir_override)
                               : std::filesystem::path(c.output_dir);
  return {std::move(c), std::move(dir)};
}

void apply_threads(const RunOptions& opts) {
  if (opts.threads) set_threads(*opts.threads);
}

bool wants_suite(const ExperimentConfig& c, const std::string& name) {
  return std::find(c.diagnostics.suites.begin(), c.diagnostics.suites.end(), name) !=
         c.diagnostics.suites.end();
}

void print_suite(const AssumptionSuite& suite, std::ostream& out) {
  for (const auto& rep : suite.reports) {
    out << "  " << assumption_name(rep.which) << ": " << (rep.passed() ? "pass" : "FAIL")
        << " (" << rep.trials << " trials";
    if (!rep.passed()) {
      out << ", worst violation " << fmt(rep.worst_violation);
      if (rep.witness) {
        out << " at x=" << fmt(rep.witness->x) << " x'=" << fmt(rep.witness->x_prime);
        if (!rep.witness->coupling.empty()) out << " coupling=" << rep.witness->coupling;
      }
    }
    out << ")\n";
  }
}

ordered_json suite_json(const AssumptionSuite& suite) {
  ordered_json arr = ordered_json::array();
  for (const auto& rep : suite.reports) {
    ordered_json r;
    r["name"] = assumption_name(rep.which);
    r["trials"] = rep.trials;
    r["worst_violation"] = rep.worst_violation;
    r["passed"] = rep.passed();
    if (rep.witness) {
      ordered_json w;
      w["x"] = rep.witness->x;
      w["x_prime"] = rep.witness->x_prime;
      if (rep.witness->m) w["m_mean"] = rep.witness->m->mean();
      if (rep.witness->m_prime) w["m_prime_mean"] = rep.witness->m_prime->mean();
      if (!rep.witness->coupling.empty()) w["coupling"] = rep.witness->coupling;
      r["witness"] = w;
    }
    arr.push_back(r);
  }
  return arr;
}

const char* status_name(IntervalResult::Status s) {
  switch (s) {
    case IntervalResult::Status::converged: return "converged";
    case IntervalResult::Status::split_max_iter: return "split_max_iter";
    case IntervalResult::Status::split_ratio: return "split_ratio";
  }
  return "?";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string control_json(const MfgSolution& sol) {
  ordered_json j;
  j["grid"]["t0"] = sol.control.grid.t0;
  j["grid"]["t1"] = sol.control.grid.t1;
  j["grid"]["steps"] = sol.control.grid.steps;
  j["basis"] = sol.control.basis.names();
  ordered_json rows = ordered_json::array();
  for (int k = 0; k < sol.control.grid.nodes(); ++k) {
    const auto row = sol.control.row(k);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["coeffs"] = rows;
  return j.dump(2) + "\n";
}

std::string flow_csv(const MfgSolution& sol) {
  std::string out = "scenario,node,time,mbar,m2\n";
  for (int s = 0; s < sol.flow.n_common; ++s) {
    for (int k = 0; k < sol.flow.grid.nodes(); ++k) {
      char line[160];
      std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.17g\n", s, k,
                    sol.flow.grid.time(k), sol.flow.mean(s, k), sol.flow.second(s, k));
      out += line;
    }
  }
  return out;
}

std::string convergence_csv(const MfgSolution& sol) {
  std::string out = "record,phase,first_node,last_node,status,iteration,distance,ratio\n";
  int rec = 0;
  for (const auto& iv : sol.intervals) {
    for (const auto& h : iv.history) {
      char line[200];
      std::snprintf(line, sizeof line, "%d,%s,%d,%d,%s,%d,%.17g,%.17g\n", rec,
                    iv.forward ? "forward" : "backward", iv.first_node, iv.last_node,
                    status_name(iv.status), h.iteration, h.distance, h.ratio);
      out += line;
    }
    rec += 1;
  }
  return out;
}

std::string paths_csv(const MfgSolution& sol) {
  std::string out = "scenario,node,time,particle,x\n";
  out.reserve(out.size() +
              static_cast<std::size_t>(sol.paths.n_common) * sol.paths.grid.nodes() *
                  sol.paths.n_particles * 32);
  for (int s = 0; s < sol.paths.n_common; ++s) {
    for (int k = 0; k < sol.paths.grid.nodes(); ++k) {
      const auto xs = sol.paths.states(s, k);
      const double t = sol.paths.grid.time(k);
      for (int j = 0; j < sol.paths.n_particles; ++j) {
        char line[96];
        std::snprintf(line, sizeof line, "%d,%d,%.17g,%d,%.17g\n", s, k, t, j, xs[j]);
        out += line;
      }
    }
  }
  return out;
}

ordered_json intervals_json(const MfgSolution& sol) {
  ordered_json arr = ordered_json::array();
  for (const auto& iv : sol.intervals) {
    ordered_json r;
    r["phase"] = iv.forward ? "forward" : "backward";
    r["first_node"] = iv.first_node;
    r["last_node"] = iv.last_node;
    r["status"] = status_name(iv.status);
    r["iterations"] = iv.iterations;
    r["residual"] = iv.residual;
    if (iv.status == IntervalResult::Status::converged) {
      ordered_json f;
      f["time"] = iv.field.time;
      f["coeffs"] = iv.field.coeffs;
      f["r2"] = iv.field.r2;
      f["lip_x"] = iv.field.lip_x;
      f["lip_m"] = iv.field.lip_m;
      r["field"] = f;
    }
    arr.push_back(r);
  }
  return arr;
}

}  // namespace

int run_check(const RunOptions& opts, std::ostream& out) {
  apply_threads(opts);
  const ExperimentConfig c = load_with_overrides(opts).config;
  out << "checking structural conditions for cost family " << c.model.cost.family() << "\n";
  const AssumptionSuite suite =
      run_assumption_checks(c.model.cost, c.diagnostics.assumption_trials, c.seed, true);
  print_suite(suite, out);
  if (!suite.core_passed) {
    out << (opts.override_assumptions
                ? "core conditions failed (override set, reporting only)\n"
                : "core conditions failed\n");
    return opts.override_assumptions ? kExitOk : kExitAssumptions;
  }
  out << "all core conditions hold\n";
  return kExitOk;
}

int run_solve(const RunOptions& opts, std::ostream& out) {
  apply_threads(opts);
  const Loaded loaded = load_with_overrides(opts);
  const ExperimentConfig& c = loaded.config;
  const auto t0 = std::chrono::steady_clock::now();

  const AssumptionSuite suite =
      run_assumption_checks(c.model.cost, c.diagnostics.assumption_trials, c.seed, true);
  if (!suite.core_passed && !opts.override_assumptions) {
    out << "structural conditions failed for cost family " << c.model.cost.family()
        << "; pass --override-assumptions to solve anyway\n";
    print_suite(suite, out);
    return kExitAssumptions;
  }

  const TimeGrid grid(0.0, c.model.horizon, c.steps);
  std::optional<ControlField> start;
  if (c.initial_control_level != 0.0) {
    start = ControlField::constant(grid, c.solver.regression.basis, c.initial_control_level);
  }
  MfgSolution sol = solve_mfg(c.model, c.steps, c.n_common, c.n_particles, c.seed, c.solver,
                              start);
  const auto t1 = std::chrono::steady_clock::now();
  for (const auto& iv : sol.intervals) {
    out << "  " << (iv.forward ? "forward " : "backward") << " [" << iv.first_node << ", "
        << iv.last_node << "]: " << status_name(iv.status) << " after " << iv.iterations
        << " iterations (residual " << fmt(iv.residual) << ")\n";
  }
  out << "solve " << (sol.converged ? "converged" : "DID NOT CONVERGE") << " in "
      << sol.total_iterations << " total iterations\n";

  // Diagnostics on the solved flow.
  const NoiseEnsemble noise = sample_noise(grid, c.n_common, c.n_particles, c.seed);
  const std::vector<double> init = sample_initial(c.model.initial, c.n_common, c.n_particles,
                                                  c.seed);
  ordered_json diag;
  {
    const CostReport cost = evaluate_cost(sol.control, c.model, sol.flow, init, noise);
    ordered_json r;
    r["value"] = cost.value;
    r["std_error"] = cost.std_error;
    r["n"] = cost.n;
    diag["cost"] = r;
    out << "  cost " << fmt(cost.value) << " +- " << fmt(cost.std_error) << "\n";
  }
  if (wants_suite(c, "assumptions")) diag["assumptions"] = suite_json(suite);
  if (wants_suite(c, "reduction")) {
    const ReductionReport rep = reduction_check(sol.paths);
    ordered_json r;
    r["worst_ratio"] = rep.worst_ratio;
    r["nodes"] = static_cast<int>(rep.mean_w2.size());
    r["max_mean_w2"] = *std::max_element(rep.mean_w2.begin(), rep.mean_w2.end());
    diag["reduction"] = r;
    out << "  reduction worst ratio " << fmt(rep.worst_ratio) << "\n";
  }
  if (wants_suite(c, "optimality")) {
    const SmpReport rep = smp_gap(sol, c.model, c.diagnostics.smp_perturbations,
                                  c.diagnostics.smp_amplitude, c.seed);
    ordered_json r;
    r["base_value"] = rep.base_value;
    r["min_gap"] = rep.min_gap;
    r["min_gap_std_error"] = rep.min_gap_std_error;
    r["argmin"] = rep.argmin;
    r["gaps"] = rep.gaps;
    diag["optimality"] = r;
    out << "  optimality min gap " << fmt(rep.min_gap) << " +- " << fmt(rep.min_gap_std_error)
        << "\n";
  }
  if (wants_suite(c, "exploitability")) {
    const ExploitabilityReport rep = exploitability(sol, c.model, c.solver);
    ordered_json r;
    r["value"] = rep.value;
    r["std_error"] = rep.std_error;
    r["j_control"] = rep.j_control;
    r["j_best"] = rep.j_best;
    r["br_iterations"] = rep.br_iterations;
    r["br_converged"] = rep.br_converged;
    diag["exploitability"] = r;
    out << "  exploitability " << fmt(rep.value) << " +- " << fmt(rep.std_error) << "\n";
  }
  const auto t2 = std::chrono::steady_clock::now();

  // Artifacts.
  const std::filesystem::path& dir = loaded.dir;
  std::filesystem::create_directories(dir);
  std::vector<std::string> artifacts;

  write_text(dir / "config.json", echo_config(c));
  artifacts.push_back("config.json");
  write_text(dir / "control.json", control_json(sol));
  artifacts.push_back("control.json");
  write_text(dir / "flow.csv", flow_csv(sol));
  artifacts.push_back("flow.csv");
  write_text(dir / "convergence.csv", convergence_csv(sol));
  artifacts.push_back("convergence.csv");

  ordered_json reports;
  reports["seed"] = c.seed;
  reports["converged"] = sol.converged;
  reports["total_iterations"] = sol.total_iterations;
  reports["intervals"] = intervals_json(sol);
  reports["diagnostics"] = diag;
  write_text(dir / "reports.json", reports.dump(2) + "\n");
  artifacts.push_back("reports.json");

  if (opts.export_paths) {
    write_text(dir / "paths.csv", paths_csv(sol));
    artifacts.push_back("paths.csv");
  }

  // Wall times and thread count live here and only here: everything else in
  // the directory is byte-stable for a fixed config and seed.
  ordered_json manifest;
  manifest["artifacts"] = artifacts;
  manifest["threads"] = max_threads();
  manifest["wall_seconds"]["solve"] = std::chrono::duration<double>(t1 - t0).count();
  manifest["wall_seconds"]["diagnostics"] = std::chrono::duration<double>(t2 - t1).count();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  out << "wrote " << artifacts.size() + 1 << " artifacts to " << dir.string() << "\n";
  return sol.converged ? kExitOk : kExitNotConverged;
}

int run_probe_uniqueness(const RunOptions& opts, std::ostream& out) {
  apply_threads(opts);
  const Loaded loaded = load_with_overrides(opts);
  const ExperimentConfig& c = loaded.config;

  const AssumptionSuite suite =
      run_assumption_checks(c.model.cost, c.diagnostics.assumption_trials, c.seed, true);
  if (!suite.core_passed && !opts.override_assumptions) {
    out << "structural conditions failed for cost family " << c.model.cost.family()
        << "; pass --override-assumptions to probe anyway\n";
    print_suite(suite, out);
    return kExitAssumptions;
  }

  const UniquenessProbe probe =
      uniqueness_probe(c.model, c.steps, c.n_common, c.n_particles, c.seed, c.solver);
  for (std::size_t i = 0, idx = 0; i < probe.starts.size(); ++i) {
    for (std::size_t j = i + 1; j < probe.starts.size(); ++j, ++idx) {
      out << "  starts " << fmt(probe.starts[i]) << " vs " << fmt(probe.starts[j])
          << ": relative distance " << fmt(probe.pairwise[idx]) << "\n";
    }
  }
  out << "max relative distance " << fmt(probe.max_relative)
      << (probe.all_converged ? "" : " (some runs did not converge)") << "\n";

  const std::filesystem::path& dir = loaded.dir;
  std::filesystem::create_directories(dir);
  ordered_json j;
  j["starts"] = probe.starts;
  j["pairwise"] = probe.pairwise;
  j["max_relative"] = probe.max_relative;
  j["all_converged"] = probe.all_converged;
  write_text(dir / "uniqueness.json", j.dump(2) + "\n");
  out << "wrote uniqueness.json to " << dir.string() << "\n";
  return probe.all_converged ? kExitOk : kExitNotConverged;
}

namespace {

template <class F>
double time_ms(F&& f, int repeats) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) f();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

}  // namespace

int run_bench(std::ostream& out) {
  const int nc = 16;
  const int np = 1000;
  const int steps = 50;
  const std::uint64_t seed = 9001;
  const TimeGrid grid(0.0, 0.5, steps);
  const NoiseEnsemble noise = sample_noise(grid, nc, np, seed);
  const std::vector<double> init =
      sample_initial(InitialDistribution::gaussian(0.0, 1.0), nc, np, seed);
  ControlField control(grid, FeatureBasis::standard());
  for (int k = 0; k < grid.nodes(); ++k) {
    control.row(k)[1] = -0.5;
    control.row(k)[2] = -0.1;
  }
  const PathEnsemble paths = propagate(control, init, noise, 1.0, 0.5);
  std::vector<double> targets(static_cast<std::size_t>(nc) * np);
  for (int s = 0; s < nc; ++s) {
    const auto xs = paths.states(s, steps);
    std::copy(xs.begin(), xs.end(), targets.begin() + static_cast<std::size_t>(s) * np);
  }
  const RegressionBasis rb;

  std::vector<double> big_a(100000);
  std::vector<double> big_b(100000);
  for (std::size_t i = 0; i < big_a.size(); ++i) {
    big_a[i] = uniform01(seed, Stream::probe, 1, static_cast<std::uint32_t>(i));
    big_b[i] = uniform01(seed, Stream::probe, 2, static_cast<std::uint32_t>(i));
  }
  const EmpiricalMeasure ma = EmpiricalMeasure::from_samples(big_a);
  const EmpiricalMeasure mb = EmpiricalMeasure::from_samples(big_b);

  out << "threads: " << max_threads() << "\n";
  out << "kernel                         parallel_ms   serial_ms   speedup\n";
  struct Row {
    const char* name;
    double par;
    double ser;
  };
  std::vector<Row> rows;
  rows.push_back({"propagate 16x1000x50",
                  time_ms([&] { propagate(control, init, noise, 1.0, 0.5); }, 5),
                  time_ms([&] { reference::propagate(control, init, noise, 1.0, 0.5); }, 5)});
  rows.push_back({"regression 51 nodes",
                  time_ms([&] { fit_all_nodes(paths, targets, rb); }, 5),
                  time_ms(
                      [&] {
                        for (int k = 0; k < grid.nodes(); ++k) {
                          reference::fit_conditional(paths, k, targets, rb);
                        }
                      },
                      5)});
  rows.push_back({"wasserstein2 100k atoms",
                  time_ms([&] { wasserstein2(ma, mb); }, 5),
                  time_ms([&] { reference::wasserstein2(ma, mb); }, 5)});
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-30s %11.3f %11.3f %9.2f\n", r.name, r.par, r.ser,
                  r.ser / r.par);
    out << line;
  }
  return kExitOk;
}

}  // namespace mfg

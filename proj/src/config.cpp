#include "mfg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mfg {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string joined(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string suggestion(const std::string& bad, const std::vector<std::string>& known) {
  std::size_t best = 3;  // suggest only close misses
  const std::string* hit = nullptr;
  for (const auto& k : known) {
    const std::size_t d = edit_distance(bad, k);
    if (d < best) {
      best = d;
      hit = &k;
    }
  }
  return hit ? " (did you mean \"" + *hit + "\"?)" : "";
}

void check_keys(const json& obj, const std::string& path,
                const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown key \"" + joined(path, key) + "\"" +
                        suggestion(key, allowed));
    }
  }
}

const json& require_object(const json& obj, const std::string& full) {
  if (!obj.is_object()) throw ConfigError("config " + full + ": expected an object");
  return obj;
}

double get_double(const json& obj, const std::string& path, const std::string& key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("config " + joined(path, key) + ": expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& path, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError("config " + joined(path, key) + ": expected an integer");
  }
  return v.get<int>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError("config " + joined(path, key) + ": expected a string");
  return v.get<std::string>();
}

void require_range(bool ok, const std::string& full, const std::string& what) {
  if (!ok) throw ConfigError("config " + full + ": " + what);
}

InitialDistribution parse_initial(const json& obj, const std::string& path) {
  require_object(obj, path);
  const std::string type = get_string(obj, path, "type", "");
  if (type.empty()) throw ConfigError("config " + path + ": missing \"type\"");
  if (type == "dirac") {
    check_keys(obj, path, {"type", "value"});
    const double v = get_double(obj, path, "value", 0.0);
    require_range(std::isfinite(v), joined(path, "value"), "must be finite");
    return InitialDistribution::dirac(v);
  }
  if (type == "gaussian") {
    check_keys(obj, path, {"type", "mean", "stddev"});
    const double mean = get_double(obj, path, "mean", 0.0);
    const double stddev = get_double(obj, path, "stddev", 1.0);
    require_range(std::isfinite(mean), joined(path, "mean"), "must be finite");
    require_range(std::isfinite(stddev) && stddev >= 0.0, joined(path, "stddev"),
                  "must be >= 0");
    return InitialDistribution::gaussian(mean, stddev);
  }
  if (type == "uniform") {
    check_keys(obj, path, {"type", "lo", "hi"});
    const double lo = get_double(obj, path, "lo", 0.0);
    const double hi = get_double(obj, path, "hi", 1.0);
    require_range(std::isfinite(lo) && std::isfinite(hi) && hi >= lo, joined(path, "hi"),
                  "must satisfy lo <= hi with both finite");
    return InitialDistribution::uniform(lo, hi);
  }
  throw ConfigError("config " + joined(path, "type") + ": unknown type \"" + type + "\"" +
                    suggestion(type, {"dirac", "gaussian", "uniform"}));
}

CostSpec parse_cost_spec(const json& obj, const std::string& path) {
  require_object(obj, path);
  CostSpec spec;
  spec.family = get_string(obj, path, "family", "");
  if (spec.family.empty()) throw ConfigError("config " + path + ": missing \"family\"");
  if (spec.family == "quadratic") {
    check_keys(obj, path, {"family", "a", "psi"});
    spec.a = get_double(obj, path, "a", 1.0);
    if (obj.contains("psi")) {
      const json& psi = require_object(obj.at("psi"), joined(path, "psi"));
      const std::string ppath = joined(path, "psi");
      check_keys(psi, ppath, {"type", "slope", "scale"});
      spec.psi_type = get_string(psi, ppath, "type", "linear");
      if (spec.psi_type == "linear") {
        check_keys(psi, ppath, {"type", "slope"});
        spec.psi_param = get_double(psi, ppath, "slope", 1.0);
      } else if (spec.psi_type == "tanh") {
        check_keys(psi, ppath, {"type", "scale"});
        spec.psi_param = get_double(psi, ppath, "scale", 1.0);
      } else {
        throw ConfigError("config " + joined(ppath, "type") + ": unknown type \"" +
                          spec.psi_type + "\"" + suggestion(spec.psi_type, {"linear", "tanh"}));
      }
    }
  } else if (spec.family == "track_mean") {
    check_keys(obj, path, {"family", "q", "q_bar", "s"});
    spec.q = get_double(obj, path, "q", 1.0);
    spec.q_bar = get_double(obj, path, "q_bar", 1.0);
    spec.s = get_double(obj, path, "s", 1.0);
  } else if (spec.family == "mean_square_distance") {
    check_keys(obj, path, {"family"});
  } else if (spec.family == "state_quadratic") {
    check_keys(obj, path, {"family", "a"});
    spec.a = get_double(obj, path, "a", 1.0);
  } else {
    throw ConfigError(
        "config " + joined(path, "family") + ": unknown family \"" + spec.family + "\"" +
        suggestion(spec.family,
                   {"quadratic", "track_mean", "mean_square_distance", "state_quadratic"}));
  }
  return spec;
}

TerminalCost build_cost(const CostSpec& spec, const std::string& path) {
  try {
    if (spec.family == "quadratic") {
      const ScalarMap psi = spec.psi_type == "linear" ? ScalarMap::linear(spec.psi_param)
                                                      : ScalarMap::tanh_map(spec.psi_param);
      return TerminalCost::quadratic(spec.a, psi);
    }
    if (spec.family == "track_mean") {
      return TerminalCost::track_mean(spec.q, spec.q_bar, spec.s);
    }
    if (spec.family == "state_quadratic") return TerminalCost::state_quadratic(spec.a);
    return TerminalCost::mean_square_distance();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

ExperimentConfig parse_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j, "",
             {"model", "discretization", "solver", "diagnostics", "seed", "output_dir"});
  ExperimentConfig c;

  if (j.contains("model")) {
    const json& m = require_object(j.at("model"), "model");
    check_keys(m, "model", {"sigma", "sigma_tilde", "horizon", "initial", "cost"});
    c.model.sigma = get_double(m, "model", "sigma", c.model.sigma);
    c.model.sigma_tilde = get_double(m, "model", "sigma_tilde", c.model.sigma_tilde);
    c.model.horizon = get_double(m, "model", "horizon", c.model.horizon);
    require_range(std::isfinite(c.model.sigma) && c.model.sigma > 0.0, "model.sigma",
                  "must be > 0");
    require_range(std::isfinite(c.model.sigma_tilde) && c.model.sigma_tilde >= 0.0,
                  "model.sigma_tilde", "must be >= 0");
    require_range(std::isfinite(c.model.horizon) && c.model.horizon > 0.0, "model.horizon",
                  "must be > 0");
    if (m.contains("initial")) c.model.initial = parse_initial(m.at("initial"), "model.initial");
    if (m.contains("cost")) c.cost_spec = parse_cost_spec(m.at("cost"), "model.cost");
  }
  c.model.cost = build_cost(c.cost_spec, "model.cost");

  c.steps = std::max(1, static_cast<int>(std::llround(100.0 * c.model.horizon)));
  if (j.contains("discretization")) {
    const json& d = require_object(j.at("discretization"), "discretization");
    check_keys(d, "discretization", {"steps", "n_common", "n_particles", "basis", "ridge"});
    c.steps = get_int(d, "discretization", "steps", c.steps);
    c.n_common = get_int(d, "discretization", "n_common", c.n_common);
    c.n_particles = get_int(d, "discretization", "n_particles", c.n_particles);
    c.ridge = get_double(d, "discretization", "ridge", c.ridge);
    require_range(c.steps >= 1, "discretization.steps", "must be >= 1");
    require_range(c.n_common >= 1, "discretization.n_common", "must be >= 1");
    require_range(c.n_particles >= 1, "discretization.n_particles", "must be >= 1");
    require_range(std::isfinite(c.ridge) && c.ridge >= 0.0, "discretization.ridge",
                  "must be >= 0");
    if (d.contains("basis")) {
      const json& b = d.at("basis");
      if (!b.is_array() || b.empty()) {
        throw ConfigError("config discretization.basis: expected a non-empty array of names");
      }
      c.basis_names.clear();
      for (const json& name : b) {
        if (!name.is_string()) {
          throw ConfigError("config discretization.basis: expected a non-empty array of names");
        }
        c.basis_names.push_back(name.get<std::string>());
      }
    }
  }
  try {
    c.solver.regression.basis = FeatureBasis::parse(c.basis_names);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config discretization.basis: ") + e.what());
  }
  c.solver.regression.ridge_scale = c.ridge;

  if (j.contains("solver")) {
    const json& s = require_object(j.at("solver"), "solver");
    check_keys(s, "solver",
               {"damping", "tol", "max_iter", "inner_damping", "inner_tol", "inner_max_iter",
                "split_ratio_threshold", "split_ratio_window", "initial_control"});
    c.solver.damping = get_double(s, "solver", "damping", c.solver.damping);
    c.solver.tol = get_double(s, "solver", "tol", c.solver.tol);
    c.solver.max_iter = get_int(s, "solver", "max_iter", c.solver.max_iter);
    c.solver.inner_damping = get_double(s, "solver", "inner_damping", c.solver.inner_damping);
    c.solver.inner_tol = get_double(s, "solver", "inner_tol", c.solver.tol / 4.0);
    c.solver.inner_max_iter = get_int(s, "solver", "inner_max_iter", c.solver.inner_max_iter);
    c.solver.split_ratio_threshold =
        get_double(s, "solver", "split_ratio_threshold", c.solver.split_ratio_threshold);
    c.solver.split_ratio_window =
        get_int(s, "solver", "split_ratio_window", c.solver.split_ratio_window);
    c.initial_control_level = get_double(s, "solver", "initial_control", 0.0);
    require_range(c.solver.damping > 0.0 && c.solver.damping <= 1.0, "solver.damping",
                  "must lie in (0, 1]");
    require_range(c.solver.tol > 0.0, "solver.tol", "must be > 0");
    require_range(c.solver.max_iter >= 1, "solver.max_iter", "must be >= 1");
    require_range(c.solver.inner_damping > 0.0 && c.solver.inner_damping <= 1.0,
                  "solver.inner_damping", "must lie in (0, 1]");
    require_range(c.solver.inner_tol > 0.0, "solver.inner_tol", "must be > 0");
    require_range(c.solver.inner_max_iter >= 1, "solver.inner_max_iter", "must be >= 1");
    require_range(c.solver.split_ratio_threshold > 0.0, "solver.split_ratio_threshold",
                  "must be > 0");
    require_range(c.solver.split_ratio_window >= 1, "solver.split_ratio_window",
                  "must be >= 1");
    require_range(std::isfinite(c.initial_control_level), "solver.initial_control",
                  "must be finite");
  } else {
    c.solver.inner_tol = c.solver.tol / 4.0;
  }

  if (j.contains("diagnostics")) {
    const json& d = require_object(j.at("diagnostics"), "diagnostics");
    check_keys(d, "diagnostics",
               {"suites", "assumption_trials", "smp_perturbations", "smp_amplitude"});
    if (d.contains("suites")) {
      const json& s = d.at("suites");
      if (!s.is_array()) throw ConfigError("config diagnostics.suites: expected an array");
      c.diagnostics.suites.clear();
      for (const json& name : s) {
        if (!name.is_string()) {
          throw ConfigError("config diagnostics.suites: expected an array of names");
        }
        const std::string v = name.get<std::string>();
        if (std::find(known_suites().begin(), known_suites().end(), v) ==
            known_suites().end()) {
          throw ConfigError("config diagnostics.suites: unknown suite \"" + v + "\"" +
                            suggestion(v, known_suites()));
        }
        c.diagnostics.suites.push_back(v);
      }
    }
    if (d.contains("assumption_trials")) {
      const json& v = d.at("assumption_trials");
      if (!v.is_number_integer()) {
        throw ConfigError("config diagnostics.assumption_trials: expected an integer");
      }
      c.diagnostics.assumption_trials = v.get<std::int64_t>();
    }
    c.diagnostics.smp_perturbations =
        get_int(d, "diagnostics", "smp_perturbations", c.diagnostics.smp_perturbations);
    c.diagnostics.smp_amplitude =
        get_double(d, "diagnostics", "smp_amplitude", c.diagnostics.smp_amplitude);
    require_range(c.diagnostics.assumption_trials >= 1, "diagnostics.assumption_trials",
                  "must be >= 1");
    require_range(c.diagnostics.smp_perturbations >= 1, "diagnostics.smp_perturbations",
                  "must be >= 1");
    require_range(std::isfinite(c.diagnostics.smp_amplitude) &&
                      c.diagnostics.smp_amplitude > 0.0,
                  "diagnostics.smp_amplitude", "must be > 0");
  }
  if (c.diagnostics.suites.empty()) c.diagnostics.suites = known_suites();

  if (!j.contains("seed")) throw ConfigError("config: missing required key \"seed\"");
  const json& seed = j.at("seed");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() &&
                                    seed.get<std::int64_t>() < 0)) {
    throw ConfigError("config seed: expected a nonnegative integer");
  }
  c.seed = seed.get<std::uint64_t>();

  c.output_dir = get_string(j, "", "output_dir", c.output_dir);
  require_range(!c.output_dir.empty(), "output_dir", "must not be empty");
  return c;
}

}  // namespace

const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> suites = {"assumptions", "reduction", "optimality",
                                                  "exploitability"};
  return suites;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_json(j);
}

std::string echo_config(const ExperimentConfig& c) {
  ordered_json out;
  ordered_json model;
  model["sigma"] = c.model.sigma;
  model["sigma_tilde"] = c.model.sigma_tilde;
  model["horizon"] = c.model.horizon;
  ordered_json initial;
  switch (c.model.initial.kind) {
    case InitialDistribution::Kind::dirac:
      initial["type"] = "dirac";
      initial["value"] = c.model.initial.a;
      break;
    case InitialDistribution::Kind::gaussian:
      initial["type"] = "gaussian";
      initial["mean"] = c.model.initial.a;
      initial["stddev"] = c.model.initial.b;
      break;
    case InitialDistribution::Kind::uniform:
      initial["type"] = "uniform";
      initial["lo"] = c.model.initial.a;
      initial["hi"] = c.model.initial.b;
      break;
  }
  model["initial"] = initial;
  ordered_json cost;
  cost["family"] = c.cost_spec.family;
  if (c.cost_spec.family == "quadratic") {
    cost["a"] = c.cost_spec.a;
    ordered_json psi;
    psi["type"] = c.cost_spec.psi_type;
    psi[c.cost_spec.psi_type == "linear" ? "slope" : "scale"] = c.cost_spec.psi_param;
    cost["psi"] = psi;
  } else if (c.cost_spec.family == "track_mean") {
    cost["q"] = c.cost_spec.q;
    cost["q_bar"] = c.cost_spec.q_bar;
    cost["s"] = c.cost_spec.s;
  } else if (c.cost_spec.family == "state_quadratic") {
    cost["a"] = c.cost_spec.a;
  }
  model["cost"] = cost;
  out["model"] = model;

  ordered_json disc;
  disc["steps"] = c.steps;
  disc["n_common"] = c.n_common;
  disc["n_particles"] = c.n_particles;
  disc["basis"] = c.basis_names;
  disc["ridge"] = c.ridge;
  out["discretization"] = disc;

  ordered_json solver;
  solver["damping"] = c.solver.damping;
  solver["tol"] = c.solver.tol;
  solver["max_iter"] = c.solver.max_iter;
  solver["inner_damping"] = c.solver.inner_damping;
  solver["inner_tol"] = c.solver.inner_tol;
  solver["inner_max_iter"] = c.solver.inner_max_iter;
  solver["split_ratio_threshold"] = c.solver.split_ratio_threshold;
  solver["split_ratio_window"] = c.solver.split_ratio_window;
  solver["initial_control"] = c.initial_control_level;
  out["solver"] = solver;

  ordered_json diag;
  diag["suites"] = c.diagnostics.suites;
  diag["assumption_trials"] = c.diagnostics.assumption_trials;
  diag["smp_perturbations"] = c.diagnostics.smp_perturbations;
  diag["smp_amplitude"] = c.diagnostics.smp_amplitude;
  out["diagnostics"] = diag;

  out["seed"] = c.seed;
  out["output_dir"] = c.output_dir;
  return out.dump(2) + "\n";
}

}  // namespace mfg

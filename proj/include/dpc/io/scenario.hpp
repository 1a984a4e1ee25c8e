#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpc/engine.hpp"

namespace dpc::io {

inline constexpr int kSchemaVersion = 1;

/// Run-time knobs a command line may override after the file is read.
struct ScenarioOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> k_interval;
};

/// A parsed scenario plus the descriptive bits that only matter for reporting.
struct LoadedScenario {
  Scenario scenario;
  std::vector<std::string> system_names;  // preset name or "custom" per agent
  std::string reference_source;           // "mixture" or the point-file path
};

namespace detail {

using json = nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline const json& require_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InputError(join(path, key) + ": unknown key");
  }
  return j;
}

inline const json& require_key(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw InputError(join(path, key) + ": missing required key");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(path + ": must be finite");
  return v;
}

inline long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw InputError(path + ": expected an integer");
  return j.get<long long>();
}

inline double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, join(path, key));
}

inline Vector vector_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw InputError(path + ": expected a nonempty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], at(path, i));
  return v;
}

inline Matrix matrix_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw InputError(path + ": expected a nonempty array of rows");
  std::size_t cols = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].empty()) throw InputError(at(path, i) + ": expected a nonempty row");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols) throw InputError(at(path, i) + ": ragged row");
  }
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = number(j[i][c], at(at(path, i), c));
    }
  }
  return m;
}

inline Point point_of(const json& j, const std::string& path) {
  const Vector v = vector_of(j, path);
  if (v.size() != 2) throw InputError(path + ": expected 2 coordinates");
  return {v(0), v(1)};
}

inline PresetParams preset_params(const json& j, const std::string& path) {
  require_object(j, path, {"gravity", "inertia_xx", "inertia_yy", "max_angle", "max_rate", "max_speed", "max_torque"});
  PresetParams p;
  p.gravity = number_or(j, path, "gravity", p.gravity);
  p.inertia_xx = number_or(j, path, "inertia_xx", p.inertia_xx);
  p.inertia_yy = number_or(j, path, "inertia_yy", p.inertia_yy);
  p.max_angle = number_or(j, path, "max_angle", p.max_angle);
  p.max_rate = number_or(j, path, "max_rate", p.max_rate);
  p.max_speed = number_or(j, path, "max_speed", p.max_speed);
  p.max_torque = number_or(j, path, "max_torque", p.max_torque);
  return p;
}

/// Rethrows module errors with the JSON path in front.
template <class F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(path + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline LtiSystem system_of(const json& j, const std::string& path, std::string& name) {
  require_object(j, path, {"preset", "dt", "params", "A", "B", "C", "state_bounds"});
  const double dt = number(require_key(j, path, "dt"), join(path, "dt"));
  if (!(dt > 0.0)) throw InputError(join(path, "dt") + ": must be positive");
  if (j.contains("preset")) {
    for (const char* k : {"A", "B", "C", "state_bounds"}) {
      if (j.contains(k)) throw InputError(join(path, k) + ": not allowed together with a preset");
    }
    if (!j["preset"].is_string()) throw InputError(join(path, "preset") + ": expected a string");
    const std::string preset = j["preset"].get<std::string>();
    const Preset p = with_path(join(path, "preset"), [&] { return parse_preset(preset); });
    const PresetParams params = j.contains("params") ? preset_params(j["params"], join(path, "params")) : PresetParams{};
    name = preset;
    return with_path(path, [&] { return make_preset(p, dt, params); });
  }
  if (j.contains("params")) throw InputError(join(path, "params") + ": only valid with a preset");
  Matrix a = matrix_of(require_key(j, path, "A"), join(path, "A"));
  Matrix b = matrix_of(require_key(j, path, "B"), join(path, "B"));
  Matrix c = matrix_of(require_key(j, path, "C"), join(path, "C"));
  std::vector<Interval> bounds;
  if (j.contains("state_bounds") && !j["state_bounds"].is_null()) {
    const auto& sb = j["state_bounds"];
    const std::string sp = join(path, "state_bounds");
    if (!sb.is_array() || static_cast<Eigen::Index>(sb.size()) != a.rows()) {
      throw InputError(sp + ": expected one [lo, hi] pair per state");
    }
    for (std::size_t i = 0; i < sb.size(); ++i) {
      if (!sb[i].is_array() || sb[i].size() != 2) throw InputError(at(sp, i) + ": expected [lo, hi]");
      auto bound = [&](const json& v, std::size_t w) {
        if (v.is_null()) return w == 0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        return number(v, at(at(sp, i), w));
      };
      Interval iv{bound(sb[i][0], 0), bound(sb[i][1], 1)};
      if (!(iv.lo <= iv.hi)) throw InputError(at(sp, i) + ": lo exceeds hi");
      bounds.push_back(iv);
    }
  }
  name = "custom";
  return with_path(path, [&] { return LtiSystem::create(a, b, c, dt, bounds); });
}

inline std::optional<InputConstraints> constraints_of(const json& j, const std::string& path, const LtiSystem& sys) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) {
    if (j.get<std::string>() != "system") throw InputError(path + ": expected null, \"system\" or an object");
    return sys.input_constraints();
  }
  require_object(j, path, {"u_max", "Cu", "Du"});
  const auto m = sys.input_dim();
  if (j.contains("u_max")) {
    if (j.contains("Cu") || j.contains("Du")) throw InputError(path + ": give either u_max or Cu/Du");
    const double u_max = number(j["u_max"], join(path, "u_max"));
    if (!(u_max >= 0.0)) throw InputError(join(path, "u_max") + ": must be nonnegative");
    return box_constraints(m, u_max);
  }
  InputConstraints ic;
  ic.Cu = matrix_of(require_key(j, path, "Cu"), join(path, "Cu"));
  ic.Du = vector_of(require_key(j, path, "Du"), join(path, "Du"));
  if (ic.Cu.cols() != m) {
    throw InputError(join(path, "Cu") + ": expected " + std::to_string(m) + " columns, got " + std::to_string(ic.Cu.cols()));
  }
  if (ic.Du.size() != ic.Cu.rows()) {
    throw InputError(join(path, "Du") + ": expected " + std::to_string(ic.Cu.rows()) + " entries, got " +
                     std::to_string(ic.Du.size()));
  }
  return ic;
}

inline AgentSpec agent_of(const json& j, const std::string& path, std::string& name) {
  require_object(j, path, {"system", "initial_state", "initial_position", "budget", "input_constraints"});
  LtiSystem sys = system_of(require_key(j, path, "system"), join(path, "system"), name);
  const long long budget = integer(require_key(j, path, "budget"), join(path, "budget"));
  if (budget < 1 || budget > 100000000) throw InputError(join(path, "budget") + ": must be a positive step count");
  if (j.contains("input_constraints")) {
    auto ic = constraints_of(j["input_constraints"], join(path, "input_constraints"), sys);
    sys = with_path(join(path, "input_constraints"), [&] {
      LtiSystem constrained = sys.with_input_constraints(std::move(ic));
      check_input_feasible(constrained);
      return constrained;
    });
  }
  Vector x0;
  const bool has_state = j.contains("initial_state"), has_pos = j.contains("initial_position");
  if (has_state == has_pos) throw InputError(path + ": give exactly one of initial_state or initial_position");
  if (has_state) {
    x0 = vector_of(j["initial_state"], join(path, "initial_state"));
    if (x0.size() != sys.state_dim()) {
      throw InputError(join(path, "initial_state") + ": expected " + std::to_string(sys.state_dim()) + " entries");
    }
  } else {
    const Vector y = vector_of(j["initial_position"], join(path, "initial_position"));
    if (y.size() != sys.output_dim()) throw InputError(join(path, "initial_position") + ": wrong dimension");
    x0 = state_at_output(sys, y);
  }
  return {std::move(sys), std::move(x0), static_cast<int>(budget)};
}

inline SampleCloud reference_of(const json& j, const std::string& path, std::uint64_t seed,
                                const std::filesystem::path& base_dir, std::string& source) {
  require_object(j, path, {"mixture", "file"});
  if (j.contains("mixture") == j.contains("file")) throw InputError(path + ": give exactly one of mixture or file");
  if (j.contains("file")) {
    if (!j["file"].is_string()) throw InputError(join(path, "file") + ": expected a path string");
    std::filesystem::path p = j["file"].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    source = p.string();
    return with_path(join(path, "file"), [&] { return load_points(p.string()); });
  }
  const std::string mp = join(path, "mixture");
  const auto& mj = require_object(j["mixture"], mp, {"components", "n_samples", "seed", "domain"});
  MixtureSpec spec;
  const long long n = integer(require_key(mj, mp, "n_samples"), join(mp, "n_samples"));
  if (n < 1) throw InputError(join(mp, "n_samples") + ": must be at least 1");
  spec.n_samples = static_cast<std::size_t>(n);
  spec.seed = mj.contains("seed") ? static_cast<std::uint64_t>(integer(mj["seed"], join(mp, "seed"))) : seed;
  if (mj.contains("domain")) {
    const Vector d = vector_of(mj["domain"], join(mp, "domain"));
    if (d.size() != 4) throw InputError(join(mp, "domain") + ": expected [x_min, x_max, y_min, y_max]");
    spec.domain = {d(0), d(1), d(2), d(3)};
  }
  const auto& comps = require_key(mj, mp, "components");
  const std::string cp = join(mp, "components");
  if (!comps.is_array() || comps.empty()) throw InputError(cp + ": expected a nonempty array");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string ip = at(cp, i);
    require_object(comps[i], ip, {"mean", "covariance", "weight"});
    MixtureComponent c;
    c.mean = point_of(require_key(comps[i], ip, "mean"), join(ip, "mean"));
    const Matrix cov = matrix_of(require_key(comps[i], ip, "covariance"), join(ip, "covariance"));
    if (cov.rows() != 2 || cov.cols() != 2) throw InputError(join(ip, "covariance") + ": expected a 2x2 matrix");
    c.covariance = cov;
    c.weight = number(require_key(comps[i], ip, "weight"), join(ip, "weight"));
    spec.components.push_back(c);
  }
  source = "mixture";
  return with_path(mp, [&] { return sample_mixture(spec); });
}

inline CommConfig comm_of(const json& j, const std::string& path) {
  require_object(j, path, {"range", "latency"});
  CommConfig cfg;
  if (j.contains("range") && !j["range"].is_null()) cfg.d_comm = number(j["range"], join(path, "range"));
  if (j.contains("latency") && !j["latency"].is_null()) {
    const std::string lp = join(path, "latency");
    require_object(j["latency"], lp, {"mean_ms", "jitter_ms"});
    cfg.latency = LatencyModel{number(require_key(j["latency"], lp, "mean_ms"), join(lp, "mean_ms")),
                               number_or(j["latency"], lp, "jitter_ms", 0.0)};
  }
  with_path(path, [&] {
    validate(cfg);
    return 0;
  });
  return cfg;
}

}  // namespace detail

/**
 * Builds a Scenario from its JSON form. Relative point-file paths resolve
 * against `base_dir`. Errors name the offending key path.
 */
inline LoadedScenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".",
                                     const ScenarioOverrides& ov = {}) {
  using namespace detail;
  require_object(doc, "scenario", {"schema_version", "seed", "agents", "reference", "communication", "global_w"});
  const long long version = integer(require_key(doc, "", "schema_version"), "schema_version");
  if (version != kSchemaVersion) {
    throw InputError("schema_version: unsupported version " + std::to_string(version) + " (expected " +
                     std::to_string(kSchemaVersion) + ")");
  }
  LoadedScenario out;
  Scenario& sc = out.scenario;
  if (doc.contains("seed")) {
    const long long s = integer(doc["seed"], "seed");
    if (s < 0) throw InputError("seed: must be nonnegative");
    sc.seed = static_cast<std::uint64_t>(s);
  }
  if (ov.seed) sc.seed = *ov.seed;

  const auto& agents = require_key(doc, "", "agents");
  if (!agents.is_array() || agents.empty()) throw InputError("agents: expected a nonempty array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    std::string name;
    sc.agents.push_back(agent_of(agents[i], at("agents", i), name));
    out.system_names.push_back(name);
  }
  sc.reference = reference_of(require_key(doc, "", "reference"), "reference", sc.seed, base_dir, out.reference_source);
  if (doc.contains("communication")) sc.comm = comm_of(doc["communication"], "communication");
  if (doc.contains("global_w")) {
    const auto& g = require_object(doc["global_w"], "global_w", {"interval", "cap"});
    if (g.contains("interval")) sc.k_interval = static_cast<int>(integer(g["interval"], "global_w.interval"));
    if (g.contains("cap")) {
      const long long cap = integer(g["cap"], "global_w.cap");
      if (cap < 1 || cap > 500) throw InputError("global_w.cap: must be between 1 and 500");
      sc.w_cap = static_cast<std::size_t>(cap);
    }
  }
  if (ov.k_interval) sc.k_interval = *ov.k_interval;
  if (sc.k_interval < 1) throw InputError("global_w.interval: must be at least 1");
  validate(sc);
  return out;
}

inline LoadedScenario load_scenario(const std::string& path, const ScenarioOverrides& ov = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": malformed JSON (" + e.what() + ")");
  }
  return parse_scenario(doc, std::filesystem::path(path).parent_path(), ov);
}

}  // namespace dpc::io

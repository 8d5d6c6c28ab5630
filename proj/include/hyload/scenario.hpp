#pragma once

// Scenario documents: strict JSON parsing, emission and resolution into the
// numerical types. Bus identifiers are 1-based in files and 0-based in code.

#include <hyload/consensus.hpp>
#include <hyload/control.hpp>
#include <hyload/error.hpp>
#include <hyload/grid.hpp>
#include <hyload/hybrid.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace hyload {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// One hysteretic load as written; fields left empty are synthesized.
struct LoadEntry {
  std::size_t bus = 0;
  std::optional<double> omega_off;
  std::optional<double> omega_on;
  std::optional<double> magnitude;
  std::optional<double> pc_low;
  std::optional<double> pc_high;
  std::optional<double> cost;

  bool operator==(const LoadEntry&) const = default;
};

struct SynthesisSpec {
  std::string rule;  // "design1" | "design2"
  double omega_on_factor = 2.0;

  bool operator==(const SynthesisSpec&) const = default;
};

struct ControllerSpec {
  ControlMode mode = ControlMode::Hysteresis;
  StaticSubMode static_mode = StaticSubMode::Sampled;
  double sampling_period = 0.01;
  std::vector<StaticSwitchConfig> static_loads;
  std::vector<LoadEntry> loads;
  std::optional<SynthesisSpec> synthesis;

  bool operator==(const ControllerSpec&) const = default;
};

struct DiagnosticsSpec {
  std::optional<double> limit_cycle_window;  // default 20% of the horizon
  std::size_t limit_cycle_switches = 4;
  double limit_cycle_omega_range = 1e-6;
  std::size_t chattering_run = 5;
  double chattering_factor = 5.0;
  std::optional<double> settle_time;

  bool operator==(const DiagnosticsSpec&) const = default;
};

/// Behavioural verdicts the operator asks the run to confirm.
struct ExpectSpec {
  std::optional<bool> converged;
  std::optional<bool> limit_cycle;
  std::optional<bool> chattering;

  bool operator==(const ExpectSpec&) const = default;
};

struct CommunicationSpec {
  std::vector<CommLink> links;
  std::vector<double> bus_gains;  // empty: all 1
  std::optional<double> horizon;  // standalone consensus run; default: simulation horizon
  double dt = 0.01;
  double output_period = 0.1;

  bool operator==(const CommunicationSpec&) const = default;
};

struct OptimizationSpec {
  std::size_t ga_generations = 100;
  std::size_t ga_population = 64;
  std::optional<std::vector<int>> sigma;  // switch vector to certify

  bool operator==(const OptimizationSpec&) const = default;
};

struct ScenarioDocument {
  int schema_version = kSchemaVersion;
  std::string name;
  std::vector<BusParams> buses;
  std::vector<LineParams> lines;
  ControllerSpec controller;
  std::vector<Disturbance> disturbances;
  SimConfig simulation;
  DiagnosticsSpec diagnostics;
  ExpectSpec expect;
  std::optional<CommunicationSpec> communication;
  std::optional<OptimizationSpec> optimization;

  bool operator==(const ScenarioDocument&) const = default;
};

struct ResolvedScenario {
  NetworkModel model;        // initial loads
  NetworkModel final_model;  // loads after every disturbance
  ControllerSet controllers;
  DesignReport design;
};

namespace detail {

inline Error validation(const std::string& where, const std::string& what) {
  return Error(ErrorKind::ValidationError, where + ": " + what);
}

inline void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw validation(path, "expected an object");
}

inline void allowed_keys(const Json& j, const std::string& path,
                         std::initializer_list<const char*> keys) {
  require_object(j, path);
  for (const auto& [k, _] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
      throw validation(path, "unknown key '" + k + "'");
    }
  }
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw validation(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw validation(path, "must be finite");
  return v;
}

inline std::optional<double> opt_number(const Json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) return std::nullopt;
  return number(obj.at(key), path + "." + key);
}

inline double number_or(const Json& obj, const char* key, const std::string& path, double dflt) {
  return opt_number(obj, key, path).value_or(dflt);
}

inline double required_number(const Json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw validation(path, std::string("missing '") + key + "'");
  return number(obj.at(key), path + "." + key);
}

/// Frequency given in rad/s under `key` or in Hz under `key_hz`.
inline std::optional<double> opt_frequency(const Json& obj, const std::string& key,
                                           const std::string& path) {
  const std::string hz = key + "_hz";
  const bool a = obj.contains(key), b = obj.contains(hz);
  if (a && b) throw validation(path, "give either '" + key + "' or '" + hz + "', not both");
  if (a) return number(obj.at(key), path + "." + key);
  if (b) return 2.0 * std::numbers::pi * number(obj.at(hz), path + "." + hz);
  return std::nullopt;
}

inline double required_frequency(const Json& obj, const std::string& key, const std::string& path) {
  auto v = opt_frequency(obj, key, path);
  if (!v) throw validation(path, "missing '" + key + "' (or '" + key + "_hz')");
  return *v;
}

inline std::size_t count(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw validation(path, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

inline std::size_t bus_ref(const Json& j, const std::string& path, std::size_t bus_count) {
  if (!j.is_number_integer()) throw validation(path, "expected a bus id (integer)");
  const long long id = j.get<long long>();
  if (id < 1 || static_cast<std::size_t>(id) > bus_count) {
    throw validation(path, "bus " + std::to_string(id) + " does not exist");
  }
  return static_cast<std::size_t>(id - 1);
}

inline std::size_t required_bus(const Json& obj, const char* key, const std::string& path,
                                std::size_t bus_count) {
  if (!obj.contains(key)) throw validation(path, std::string("missing '") + key + "'");
  return bus_ref(obj.at(key), path + "." + key, bus_count);
}

inline const Json& required_array(const Json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || !obj.at(key).is_array()) {
    throw validation(path, std::string("'") + key + "' must be an array");
  }
  return obj.at(key);
}

inline ControlMode parse_mode(const Json& j, const std::string& path) {
  if (!j.is_string()) throw validation(path, "expected a string");
  const auto s = j.get<std::string>();
  if (s == "static") return ControlMode::Static;
  if (s == "hysteresis") return ControlMode::Hysteresis;
  if (s == "adapted") return ControlMode::Adapted;
  if (s == "optimal") return ControlMode::Optimal;
  throw validation(path, "mode must be static, hysteresis, adapted or optimal");
}

inline const char* static_mode_name(StaticSubMode m) {
  return m == StaticSubMode::Sampled ? "sampled" : "filippov";
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace detail

/// Converts module errors raised while assembling the scenario into
/// validation errors carrying the document path.
template <typename F>
auto as_validation(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ValidationError || e.kind() == ErrorKind::ParseError) throw;
    throw detail::validation(where, e.what());
  }
}

inline ControllerSet resolve_controllers(const ControllerSpec& spec, const NetworkModel& model) {
  ControllerSet c;
  c.mode = spec.mode;
  c.static_mode = spec.static_mode;
  c.sampling_period = spec.sampling_period;
  if (spec.mode == ControlMode::Static) {
    if (!spec.loads.empty() || spec.synthesis) {
      throw detail::validation("controller", "static mode takes 'static_loads' only");
    }
    if (!(spec.sampling_period > 0.0)) {
      throw detail::validation("controller.sampling_period", "must be > 0");
    }
    for (std::size_t k = 0; k < spec.static_loads.size(); ++k) {
      as_validation("controller.static_loads[" + std::to_string(k) + "]",
                    [&] { validate(spec.static_loads[k]); });
    }
    c.static_loads = spec.static_loads;
    return c;
  }
  if (!spec.static_loads.empty()) {
    throw detail::validation("controller", "'static_loads' needs mode static");
  }
  const double D = model.droop_damping_sum();
  const std::string rule = spec.synthesis ? spec.synthesis->rule : "";
  auto need = [](const std::optional<double>& v, std::size_t k, const char* field) {
    if (!v) {
      throw detail::validation("controller.loads[" + std::to_string(k) + "]",
                               std::string("missing '") + field + "'");
    }
    return *v;
  };

  if (rule == "design2") {
    if (spec.mode != ControlMode::Optimal) {
      throw detail::validation("controller.synthesis", "design2 needs mode optimal");
    }
    std::vector<LoadSpec> specs;
    for (std::size_t k = 0; k < spec.loads.size(); ++k) {
      const auto& l = spec.loads[k];
      if (l.omega_off || l.pc_low || l.pc_high) {
        throw detail::validation("controller.loads[" + std::to_string(k) + "]",
                                 "design2 synthesizes omega_off, pc_low and pc_high");
      }
      specs.push_back({l.bus, need(l.cost, k, "cost"), need(l.magnitude, k, "magnitude"), l.omega_on});
    }
    c.loads = as_validation("controller.synthesis", [&] {
      return make_design2(specs, D, spec.synthesis->omega_on_factor).loads;
    });
  } else {
    if (!rule.empty() && rule != "design1") {
      throw detail::validation("controller.synthesis.rule", "must be design1 or design2");
    }
    if (rule == "design1" && spec.mode != ControlMode::Adapted) {
      throw detail::validation("controller.synthesis", "design1 needs mode adapted");
    }
    for (std::size_t k = 0; k < spec.loads.size(); ++k) {
      const auto& l = spec.loads[k];
      HysteresisConfig h;
      h.bus = l.bus;
      h.omega_off = need(l.omega_off, k, "omega_off");
      h.omega_on = need(l.omega_on, k, "omega_on");
      h.magnitude = need(l.magnitude, k, "magnitude");
      if (rule == "design1") {
        if (l.pc_low) {
          throw detail::validation("controller.loads[" + std::to_string(k) + "]",
                                   "design1 synthesizes pc_low");
        }
        h.pc_low = D * h.omega_off;
      } else if (spec.mode != ControlMode::Hysteresis) {
        h.pc_low = need(l.pc_low, k, "pc_low");
      }
      if (spec.mode == ControlMode::Optimal) {
        h.pc_high = need(l.pc_high, k, "pc_high");
        h.cost = need(l.cost, k, "cost");
      } else {
        h.pc_high = l.pc_high.value_or(0.0);
        h.cost = l.cost.value_or(0.0);
      }
      c.loads.push_back(h);
    }
  }
  for (std::size_t k = 0; k < c.loads.size(); ++k) {
    as_validation("controller.loads[" + std::to_string(k) + "]",
                  [&] { validate(c.loads[k], spec.mode); });
  }
  return c;
}

inline ResolvedScenario resolve(const ScenarioDocument& doc) {
  ResolvedScenario r;
  r.model = as_validation("network", [&] { return build_network(doc.buses, doc.lines); });
  auto loads = r.model.loads();
  for (const auto& d : doc.disturbances) loads[d.bus] += d.delta;
  r.final_model = r.model.with_loads(loads);
  r.controllers = resolve_controllers(doc.controller, r.model);
  if (doc.communication) {
    r.controllers.communication = as_validation("communication", [&] {
      return CommGraph::build(r.model.bus_count(), doc.communication->links,
                              doc.communication->bus_gains);
    });
  }
  if (doc.controller.mode != ControlMode::Static) {
    r.design = validate_design(r.controllers.loads, r.model.droop_damping_sum(), doc.controller.mode);
  }
  const auto& s = doc.simulation;
  if (!(s.horizon > 0.0) || !(s.dt > 0.0) || !(s.event_tolerance > 0.0) ||
      s.event_tolerance > s.dt || !(s.output_period > 0.0)) {
    throw detail::validation("simulation",
                             "needs horizon > 0, dt > 0, 0 < event_tolerance <= dt, "
                             "output_period > 0");
  }
  if (doc.diagnostics.limit_cycle_window &&
      !(*doc.diagnostics.limit_cycle_window > 0.0 &&
        2.0 * *doc.diagnostics.limit_cycle_window <= s.horizon)) {
    throw detail::validation("diagnostics.limit_cycle_window", "needs 0 < 2W <= horizon");
  }
  if (doc.optimization && doc.optimization->sigma &&
      doc.optimization->sigma->size() != r.controllers.loads.size()) {
    throw detail::validation("optimization.sigma", "one entry per load required");
  }
  return r;
}

/// Strict parse: unknown keys are rejected and the result is fully
/// validated (network, controllers, references) before it is returned.
inline ScenarioDocument parse_scenario(const std::string& text) {
  using namespace detail;
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  allowed_keys(root, "scenario",
               {"schema_version", "name", "network", "controller", "disturbances", "simulation",
                "diagnostics", "expect", "communication", "optimization"});
  ScenarioDocument doc;
  if (!root.contains("schema_version")) throw validation("scenario", "missing 'schema_version'");
  if (!root.at("schema_version").is_number_integer() ||
      root.at("schema_version").get<int>() != kSchemaVersion) {
    throw validation("scenario.schema_version",
                     "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  if (root.contains("name")) {
    if (!root.at("name").is_string()) throw validation("scenario.name", "expected a string");
    doc.name = root.at("name").get<std::string>();
  }

  // network
  if (!root.contains("network")) throw validation("scenario", "missing 'network'");
  const Json& net = root.at("network");
  allowed_keys(net, "network", {"buses", "lines"});
  const Json& buses = required_array(net, "buses", "network");
  for (std::size_t j = 0; j < buses.size(); ++j) {
    const std::string p = "network.buses[" + std::to_string(j) + "]";
    const Json& b = buses[j];
    allowed_keys(b, p, {"id", "inertia", "damping", "droop", "time_constant", "load", "gen_cost"});
    if (b.contains("id") && (!b.at("id").is_number_integer() ||
                             b.at("id").get<long long>() != static_cast<long long>(j + 1))) {
      throw validation(p + ".id", "bus ids must be 1, 2, ... in order");
    }
    BusParams bp;
    bp.inertia = required_number(b, "inertia", p);
    bp.damping = required_number(b, "damping", p);
    bp.droop = required_number(b, "droop", p);
    bp.time_constant = required_number(b, "time_constant", p);
    bp.load = number_or(b, "load", p, 0.0);
    bp.gen_cost = number_or(b, "gen_cost", p, 1.0 / bp.droop);
    doc.buses.push_back(bp);
  }
  const std::size_t n = doc.buses.size();
  if (net.contains("lines")) {
    const Json& lines = required_array(net, "lines", "network");
    for (std::size_t k = 0; k < lines.size(); ++k) {
      const std::string p = "network.lines[" + std::to_string(k) + "]";
      allowed_keys(lines[k], p, {"from", "to", "susceptance"});
      doc.lines.push_back({required_bus(lines[k], "from", p, n), required_bus(lines[k], "to", p, n),
                           required_number(lines[k], "susceptance", p)});
    }
  }

  // controller
  if (!root.contains("controller")) throw validation("scenario", "missing 'controller'");
  const Json& ctl = root.at("controller");
  allowed_keys(ctl, "controller",
               {"mode", "static_mode", "sampling_period", "static_loads", "loads", "synthesis"});
  if (!ctl.contains("mode")) throw validation("controller", "missing 'mode'");
  auto& cs = doc.controller;
  cs.mode = parse_mode(ctl.at("mode"), "controller.mode");
  if (ctl.contains("static_mode")) {
    const auto& sm = ctl.at("static_mode");
    if (sm == "sampled") {
      cs.static_mode = StaticSubMode::Sampled;
    } else if (sm == "filippov") {
      cs.static_mode = StaticSubMode::IdealFilippov;
    } else {
      throw validation("controller.static_mode", "must be sampled or filippov");
    }
  }
  cs.sampling_period = number_or(ctl, "sampling_period", "controller", 0.01);
  if (ctl.contains("static_loads")) {
    const Json& arr = required_array(ctl, "static_loads", "controller");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string p = "controller.static_loads[" + std::to_string(k) + "]";
      allowed_keys(arr[k], p,
                   {"bus", "omega_upper", "omega_upper_hz", "omega_lower", "omega_lower_hz",
                    "demand_upper", "demand_lower"});
      StaticSwitchConfig s;
      s.bus = required_bus(arr[k], "bus", p, n);
      s.omega_upper = required_frequency(arr[k], "omega_upper", p);
      s.omega_lower = required_frequency(arr[k], "omega_lower", p);
      s.demand_upper = required_number(arr[k], "demand_upper", p);
      s.demand_lower = number_or(arr[k], "demand_lower", p, 0.0);
      cs.static_loads.push_back(s);
    }
  }
  if (ctl.contains("loads")) {
    const Json& arr = required_array(ctl, "loads", "controller");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string p = "controller.loads[" + std::to_string(k) + "]";
      allowed_keys(arr[k], p,
                   {"bus", "omega_off", "omega_off_hz", "omega_on", "omega_on_hz", "magnitude",
                    "pc_low", "pc_high", "cost"});
      LoadEntry e;
      e.bus = required_bus(arr[k], "bus", p, n);
      e.omega_off = opt_frequency(arr[k], "omega_off", p);
      e.omega_on = opt_frequency(arr[k], "omega_on", p);
      e.magnitude = opt_number(arr[k], "magnitude", p);
      e.pc_low = opt_number(arr[k], "pc_low", p);
      e.pc_high = opt_number(arr[k], "pc_high", p);
      e.cost = opt_number(arr[k], "cost", p);
      cs.loads.push_back(e);
    }
  }
  if (ctl.contains("synthesis")) {
    const Json& sy = ctl.at("synthesis");
    allowed_keys(sy, "controller.synthesis", {"rule", "omega_on_factor"});
    if (!sy.contains("rule") || !sy.at("rule").is_string()) {
      throw validation("controller.synthesis", "missing 'rule'");
    }
    cs.synthesis = SynthesisSpec{sy.at("rule").get<std::string>(),
                                 number_or(sy, "omega_on_factor", "controller.synthesis", 2.0)};
  }

  // disturbances
  if (root.contains("disturbances")) {
    const Json& arr = required_array(root, "disturbances", "scenario");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string p = "disturbances[" + std::to_string(k) + "]";
      allowed_keys(arr[k], p, {"time", "bus", "delta"});
      Disturbance d;
      d.time = required_number(arr[k], "time", p);
      if (d.time < 0.0) throw validation(p + ".time", "must be >= 0");
      d.bus = required_bus(arr[k], "bus", p, n);
      d.delta = required_number(arr[k], "delta", p);
      doc.disturbances.push_back(d);
    }
  }

  // simulation
  if (root.contains("simulation")) {
    const Json& s = root.at("simulation");
    allowed_keys(s, "simulation",
                 {"horizon", "dt", "event_tolerance", "output_period", "max_jumps"});
    auto& c = doc.simulation;
    c.horizon = number_or(s, "horizon", "simulation", c.horizon);
    c.dt = number_or(s, "dt", "simulation", c.dt);
    c.event_tolerance = number_or(s, "event_tolerance", "simulation", c.event_tolerance);
    c.output_period = number_or(s, "output_period", "simulation", c.output_period);
    if (s.contains("max_jumps")) c.max_jumps = count(s.at("max_jumps"), "simulation.max_jumps");
  }
  if (root.contains("diagnostics")) {
    const Json& d = root.at("diagnostics");
    allowed_keys(d, "diagnostics",
                 {"limit_cycle_window", "limit_cycle_switches", "limit_cycle_omega_range",
                  "chattering_run", "chattering_factor", "settle_time"});
    auto& g = doc.diagnostics;
    g.limit_cycle_window = opt_number(d, "limit_cycle_window", "diagnostics");
    if (d.contains("limit_cycle_switches")) {
      g.limit_cycle_switches = count(d.at("limit_cycle_switches"), "diagnostics.limit_cycle_switches");
    }
    g.limit_cycle_omega_range =
        number_or(d, "limit_cycle_omega_range", "diagnostics", g.limit_cycle_omega_range);
    if (d.contains("chattering_run")) {
      g.chattering_run = count(d.at("chattering_run"), "diagnostics.chattering_run");
    }
    g.chattering_factor = number_or(d, "chattering_factor", "diagnostics", g.chattering_factor);
    g.settle_time = opt_number(d, "settle_time", "diagnostics");
  }
  if (root.contains("expect")) {
    const Json& e = root.at("expect");
    allowed_keys(e, "expect", {"converged", "limit_cycle", "chattering"});
    auto flag = [&](const char* key) -> std::optional<bool> {
      if (!e.contains(key)) return std::nullopt;
      if (!e.at(key).is_boolean()) throw validation(std::string("expect.") + key, "expected a boolean");
      return e.at(key).get<bool>();
    };
    doc.expect = {flag("converged"), flag("limit_cycle"), flag("chattering")};
  }

  // communication
  if (root.contains("communication")) {
    const Json& c = root.at("communication");
    allowed_keys(c, "communication", {"links", "bus_gains", "horizon", "dt", "output_period"});
    CommunicationSpec cs2;
    const Json& links = required_array(c, "links", "communication");
    for (std::size_t k = 0; k < links.size(); ++k) {
      const std::string p = "communication.links[" + std::to_string(k) + "]";
      allowed_keys(links[k], p, {"from", "to", "gain"});
      cs2.links.push_back({required_bus(links[k], "from", p, n), required_bus(links[k], "to", p, n),
                           number_or(links[k], "gain", p, 1.0)});
    }
    if (c.contains("bus_gains")) {
      const Json& g = required_array(c, "bus_gains", "communication");
      for (std::size_t j = 0; j < g.size(); ++j) {
        cs2.bus_gains.push_back(number(g[j], "communication.bus_gains[" + std::to_string(j) + "]"));
      }
    }
    cs2.horizon = opt_number(c, "horizon", "communication");
    cs2.dt = number_or(c, "dt", "communication", cs2.dt);
    cs2.output_period = number_or(c, "output_period", "communication", cs2.output_period);
    if (!(cs2.dt > 0.0) || !(cs2.output_period > 0.0) || (cs2.horizon && !(*cs2.horizon > 0.0))) {
      throw validation("communication", "horizon, dt and output_period must be > 0");
    }
    doc.communication = std::move(cs2);
  }

  // optimization
  if (root.contains("optimization")) {
    const Json& o = root.at("optimization");
    allowed_keys(o, "optimization", {"ga_generations", "ga_population", "sigma"});
    OptimizationSpec os;
    if (o.contains("ga_generations")) os.ga_generations = count(o.at("ga_generations"), "optimization.ga_generations");
    if (o.contains("ga_population")) os.ga_population = count(o.at("ga_population"), "optimization.ga_population");
    if (o.contains("sigma")) {
      const Json& s = required_array(o, "sigma", "optimization");
      std::vector<int> sigma;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (!s[k].is_number_integer() || (s[k].get<int>() != 0 && s[k].get<int>() != 1)) {
          throw validation("optimization.sigma[" + std::to_string(k) + "]", "must be 0 or 1");
        }
        sigma.push_back(s[k].get<int>());
      }
      os.sigma = std::move(sigma);
    }
    doc.optimization = std::move(os);
  }

  resolve(doc);
  return doc;
}

inline Json to_json(const ScenarioDocument& doc) {
  Json root;
  root["schema_version"] = doc.schema_version;
  if (!doc.name.empty()) root["name"] = doc.name;
  Json buses = Json::array();
  for (std::size_t j = 0; j < doc.buses.size(); ++j) {
    const auto& b = doc.buses[j];
    buses.push_back({{"id", j + 1},
                     {"inertia", b.inertia},
                     {"damping", b.damping},
                     {"droop", b.droop},
                     {"time_constant", b.time_constant},
                     {"load", b.load},
                     {"gen_cost", b.gen_cost}});
  }
  Json lines = Json::array();
  for (const auto& l : doc.lines) {
    lines.push_back({{"from", l.from + 1}, {"to", l.to + 1}, {"susceptance", l.susceptance}});
  }
  root["network"] = {{"buses", buses}, {"lines", lines}};

  const auto& cs = doc.controller;
  Json ctl;
  ctl["mode"] = to_string(cs.mode);
  ctl["static_mode"] = detail::static_mode_name(cs.static_mode);
  ctl["sampling_period"] = cs.sampling_period;
  if (!cs.static_loads.empty()) {
    Json arr = Json::array();
    for (const auto& s : cs.static_loads) {
      arr.push_back({{"bus", s.bus + 1},
                     {"omega_upper", s.omega_upper},
                     {"omega_lower", s.omega_lower},
                     {"demand_upper", s.demand_upper},
                     {"demand_lower", s.demand_lower}});
    }
    ctl["static_loads"] = arr;
  }
  if (!cs.loads.empty()) {
    Json arr = Json::array();
    for (const auto& l : cs.loads) {
      Json e;
      e["bus"] = l.bus + 1;
      auto put = [&](const char* k, const std::optional<double>& v) {
        if (v) e[k] = *v;
      };
      put("omega_off", l.omega_off);
      put("omega_on", l.omega_on);
      put("magnitude", l.magnitude);
      put("pc_low", l.pc_low);
      put("pc_high", l.pc_high);
      put("cost", l.cost);
      arr.push_back(e);
    }
    ctl["loads"] = arr;
  }
  if (cs.synthesis) {
    ctl["synthesis"] = {{"rule", cs.synthesis->rule},
                        {"omega_on_factor", cs.synthesis->omega_on_factor}};
  }
  root["controller"] = ctl;

  Json dist = Json::array();
  for (const auto& d : doc.disturbances) {
    dist.push_back({{"time", d.time}, {"bus", d.bus + 1}, {"delta", d.delta}});
  }
  root["disturbances"] = dist;
  const auto& s = doc.simulation;
  root["simulation"] = {{"horizon", s.horizon},
                        {"dt", s.dt},
                        {"event_tolerance", s.event_tolerance},
                        {"output_period", s.output_period},
                        {"max_jumps", s.max_jumps}};
  const auto& g = doc.diagnostics;
  Json diag;
  if (g.limit_cycle_window) diag["limit_cycle_window"] = *g.limit_cycle_window;
  diag["limit_cycle_switches"] = g.limit_cycle_switches;
  diag["limit_cycle_omega_range"] = g.limit_cycle_omega_range;
  diag["chattering_run"] = g.chattering_run;
  diag["chattering_factor"] = g.chattering_factor;
  if (g.settle_time) diag["settle_time"] = *g.settle_time;
  root["diagnostics"] = diag;
  Json expect = Json::object();
  if (doc.expect.converged) expect["converged"] = *doc.expect.converged;
  if (doc.expect.limit_cycle) expect["limit_cycle"] = *doc.expect.limit_cycle;
  if (doc.expect.chattering) expect["chattering"] = *doc.expect.chattering;
  root["expect"] = expect;

  if (doc.communication) {
    const auto& c = *doc.communication;
    Json links = Json::array();
    for (const auto& l : c.links) {
      links.push_back({{"from", l.from + 1}, {"to", l.to + 1}, {"gain", l.gain}});
    }
    Json cj;
    cj["links"] = links;
    if (!c.bus_gains.empty()) cj["bus_gains"] = c.bus_gains;
    if (c.horizon) cj["horizon"] = *c.horizon;
    cj["dt"] = c.dt;
    cj["output_period"] = c.output_period;
    root["communication"] = cj;
  }
  if (doc.optimization) {
    const auto& o = *doc.optimization;
    Json oj;
    oj["ga_generations"] = o.ga_generations;
    oj["ga_population"] = o.ga_population;
    if (o.sigma) oj["sigma"] = *o.sigma;
    root["optimization"] = oj;
  }
  return root;
}

inline std::string emit_scenario(const ScenarioDocument& doc) { return to_json(doc).dump(2) + "\n"; }

}  // namespace hyload

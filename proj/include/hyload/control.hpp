#pragma once

// On-off load policies: guard/jump logic for the static, hysteresis, adapted
// and optimal schemes, plus threshold synthesis and validation.

#include <hyload/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hyload {

enum class ControlMode { Static, Hysteresis, Adapted, Optimal };
enum class StaticSubMode { IdealFilippov, Sampled };

inline const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::Static: return "static";
    case ControlMode::Hysteresis: return "hysteresis";
    case ControlMode::Adapted: return "adapted";
    case ControlMode::Optimal: return "optimal";
  }
  return "?";
}

struct StaticSwitchConfig {
  std::size_t bus = 0;
  double omega_upper = 0.0;   // > 0
  double omega_lower = 0.0;   // < 0
  double demand_upper = 0.0;  // >= 0, drawn above omega_upper
  double demand_lower = 0.0;  // <= 0, drawn at or below omega_lower

  bool operator==(const StaticSwitchConfig&) const = default;
};

struct HysteresisConfig {
  std::size_t bus = 0;
  double omega_off = 0.0;  // omega^0
  double omega_on = 0.0;   // omega^1 > omega^0 > 0
  double magnitude = 0.0;  // dbar > 0
  double pc_low = 0.0;     // adapted / optimal only
  double pc_high = 0.0;    // optimal only
  double cost = 0.0;       // c^d, optimal only

  bool operator==(const HysteresisConfig&) const = default;
};

inline void validate(const StaticSwitchConfig& c) {
  const std::string where = " (load on bus " + std::to_string(c.bus + 1) + ")";
  if (!(c.omega_upper > 0.0 && 0.0 > c.omega_lower)) {
    throw Error(ErrorKind::InvalidParameter,
                "static thresholds need omega_upper > 0 > omega_lower" + where);
  }
  if (!(c.demand_lower <= 0.0 && 0.0 <= c.demand_upper) || !std::isfinite(c.demand_lower) ||
      !std::isfinite(c.demand_upper)) {
    throw Error(ErrorKind::InvalidParameter,
                "static magnitudes need demand_lower <= 0 <= demand_upper" + where);
  }
}

inline void validate(const HysteresisConfig& c, ControlMode mode) {
  const std::string where = " (load on bus " + std::to_string(c.bus + 1) + ")";
  if (!(c.omega_on > c.omega_off && c.omega_off > 0.0) || !std::isfinite(c.omega_on)) {
    throw Error(ErrorKind::InvalidParameter, "hysteresis thresholds need omega_on > omega_off > 0" +
                                                 where);
  }
  if (!(c.magnitude > 0.0) || !std::isfinite(c.magnitude)) {
    throw Error(ErrorKind::InvalidParameter, "magnitude must be > 0" + where);
  }
  if (mode == ControlMode::Optimal) {
    if (!(c.pc_high > c.pc_low)) {
      throw Error(ErrorKind::InvalidParameter, "optimal scheme needs pc_high > pc_low" + where);
    }
    if (!(c.cost > 0.0)) throw Error(ErrorKind::InvalidParameter, "cost must be > 0" + where);
  }
}

// ---------------------------------------------------------------------------
// static policy

inline double static_demand(double omega, const StaticSwitchConfig& c) {
  if (omega > c.omega_upper) return c.demand_upper;
  if (omega > c.omega_lower) return 0.0;
  return c.demand_lower;
}

/// Discrete level of the static map: +1 above, 0 between, -1 at or below.
inline int static_level(double omega, const StaticSwitchConfig& c) {
  if (omega > c.omega_upper) return 1;
  if (omega > c.omega_lower) return 0;
  return -1;
}

inline double static_level_demand(int level, const StaticSwitchConfig& c) {
  return level > 0 ? c.demand_upper : (level < 0 ? c.demand_lower : 0.0);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
  bool operator==(const Interval&) const = default;
};

/// Convexified (Filippov) demand at a given frequency.
inline Interval static_filippov_interval(double omega, const StaticSwitchConfig& c) {
  if (omega == c.omega_upper) return {0.0, c.demand_upper};
  if (omega == c.omega_lower) return {c.demand_lower, 0.0};
  const double d = static_demand(omega, c);
  return {d, d};
}

// ---------------------------------------------------------------------------
// hysteretic policies

enum class Trigger { Frequency, PowerCommand };

inline const char* to_string(Trigger t) {
  return t == Trigger::Frequency ? "frequency" : "power-command";
}

namespace detail {

inline bool on_condition(double omega, double pc, const HysteresisConfig& c, ControlMode mode) {
  if (omega >= c.omega_on) return true;
  return mode == ControlMode::Optimal && pc >= c.pc_high;
}

inline bool off_condition(double omega, double pc, const HysteresisConfig& c, ControlMode mode) {
  if (!(omega <= c.omega_off)) return false;
  return mode == ControlMode::Hysteresis || pc <= c.pc_low;
}

}  // namespace detail

/// True when the jump map would change sigma (threshold reached or crossed).
inline bool in_jump_set(double omega, double pc, int sigma, const HysteresisConfig& c,
                        ControlMode mode) {
  return sigma == 0 ? detail::on_condition(omega, pc, c, mode)
                    : detail::off_condition(omega, pc, c, mode);
}

inline int jump_update(double omega, double pc, int sigma, const HysteresisConfig& c,
                       ControlMode mode) {
  if (!in_jump_set(omega, pc, sigma, c, mode)) return sigma;
  return sigma == 0 ? 1 : 0;
}

/// Which signal caused the jump; frequency takes precedence when both hold.
inline Trigger jump_trigger(double omega, double /*pc*/, int sigma, const HysteresisConfig& c) {
  if (sigma == 0 && omega < c.omega_on) return Trigger::PowerCommand;
  return Trigger::Frequency;
}

/// Flow-set membership: sigma is one of the admissible values at (omega, pc).
inline bool in_flow_set(double omega, double pc, int sigma, const HysteresisConfig& c,
                        ControlMode mode) {
  const bool forced_on = omega > c.omega_on || (mode == ControlMode::Optimal && pc > c.pc_high);
  const bool forced_off =
      omega < c.omega_off && (mode == ControlMode::Hysteresis || pc < c.pc_low);
  if (forced_on) return sigma == 1;
  if (forced_off) return sigma == 0;
  return true;
}

// ---------------------------------------------------------------------------
// Power-command gate: pc_low <= D * omega_off

inline std::vector<double> make_design1(std::span<const double> omega_off, double droop_damping) {
  if (!(droop_damping > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "aggregate droop+damping must be > 0");
  }
  std::vector<double> pc_low(omega_off.size());
  for (std::size_t k = 0; k < omega_off.size(); ++k) {
    if (!(omega_off[k] > 0.0)) {
      throw Error(ErrorKind::InvalidParameter,
                  "omega_off of load " + std::to_string(k + 1) + " must be > 0");
    }
    pc_low[k] = droop_damping * omega_off[k];
  }
  return pc_low;
}

inline bool design1_holds(double pc_low, double omega_off, double droop_damping) {
  return pc_low <= droop_damping * omega_off;
}

/// Sets pc_low = D * omega_off on every config.
inline void apply_design1(std::vector<HysteresisConfig>& loads, double droop_damping) {
  std::vector<double> w0(loads.size());
  for (std::size_t k = 0; k < loads.size(); ++k) w0[k] = loads[k].omega_off;
  const auto pc = make_design1(w0, droop_damping);
  for (std::size_t k = 0; k < loads.size(); ++k) loads[k].pc_low = pc[k];
}

// ---------------------------------------------------------------------------
// Cost-ranked cumulative threshold ladder

struct LoadSpec {
  std::size_t bus = 0;
  double cost = 0.0;
  double magnitude = 0.0;
  std::optional<double> omega_on;  // defaults to omega_on_factor * omega_off

  bool operator==(const LoadSpec&) const = default;
};

/// Load indices sorted by ascending cost per unit, ties by bus then index.
inline std::vector<std::size_t> cost_rank_order(std::span<const double> cost,
                                                std::span<const double> magnitude,
                                                std::span<const std::size_t> bus) {
  std::vector<std::size_t> order(cost.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = cost[a] / magnitude[a];
    const double rb = cost[b] / magnitude[b];
    if (ra != rb) return ra < rb;
    if (bus[a] != bus[b]) return bus[a] < bus[b];
    return a < b;
  });
  return order;
}

inline std::vector<std::size_t> cost_rank_order(std::span<const HysteresisConfig> loads) {
  std::vector<double> c, m;
  std::vector<std::size_t> b;
  for (const auto& l : loads) {
    c.push_back(l.cost);
    m.push_back(l.magnitude);
    b.push_back(l.bus);
  }
  return cost_rank_order(c, m, b);
}

struct Design2 {
  std::vector<HysteresisConfig> loads;  // in input order
  std::vector<std::size_t> rank_order;  // rank_order[r] = load index with rank r+1
  double min_magnitude = 0.0;           // delta-bar
};

inline Design2 make_design2(std::span<const LoadSpec> specs, double droop_damping,
                            double omega_on_factor = 2.0) {
  if (!(droop_damping > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "aggregate droop+damping must be > 0");
  }
  if (!(omega_on_factor > 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "omega_on_factor must be > 1");
  }
  std::vector<double> cost, mag;
  std::vector<std::size_t> bus;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& s = specs[k];
    if (!(s.cost > 0.0) || !(s.magnitude > 0.0)) {
      throw Error(ErrorKind::InvalidParameter,
                  "load " + std::to_string(k + 1) + " needs cost > 0 and magnitude > 0");
    }
    cost.push_back(s.cost);
    mag.push_back(s.magnitude);
    bus.push_back(s.bus);
  }

  Design2 out;
  out.rank_order = cost_rank_order(cost, mag, bus);
  out.loads.resize(specs.size());
  out.min_magnitude = specs.empty() ? 0.0 : *std::min_element(mag.begin(), mag.end());

  double cumulative = 0.0;
  for (std::size_t k : out.rank_order) {
    auto& l = out.loads[k];
    l.bus = specs[k].bus;
    l.cost = cost[k];
    l.magnitude = mag[k];
    l.omega_off = cost[k] / mag[k];
    l.omega_on = specs[k].omega_on.value_or(omega_on_factor * l.omega_off);
    if (!(l.omega_on > l.omega_off)) {
      throw Error(ErrorKind::InvalidParameter,
                  "omega_on override of load " + std::to_string(k + 1) + " must exceed omega_off");
    }
    l.pc_low = droop_damping * l.omega_off + cumulative;
    l.pc_high = l.pc_low + out.min_magnitude / 2.0;
    cumulative += mag[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// validation report

struct ConditionCheck {
  std::string condition;  // "design1", "design2.omega_off", ..., "existence.width"
  std::size_t load = 0;
  std::size_t bus = 0;
  bool passed = false;
  bool informational = false;
  double value = 0.0;
  double bound = 0.0;
};

struct DesignReport {
  std::vector<ConditionCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ConditionCheck& c) { return c.passed || c.informational; });
  }
  std::vector<ConditionCheck> failures() const {
    std::vector<ConditionCheck> out;
    for (const auto& c : checks)
      if (!c.passed && !c.informational) out.push_back(c);
    return out;
  }
};

namespace detail {
inline bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}
}  // namespace detail

inline DesignReport validate_design(std::span<const HysteresisConfig> loads, double droop_damping,
                                    ControlMode mode) {
  DesignReport report;
  auto add = [&](std::string name, std::size_t k, bool ok, double value, double bound,
                 bool info = false) {
    report.checks.push_back({std::move(name), k, loads[k].bus, ok, info, value, bound});
  };

  for (std::size_t k = 0; k < loads.size(); ++k) {
    const auto& l = loads[k];
    const double width = l.omega_on - l.omega_off;
    const double needed = l.magnitude / droop_damping;
    // Sufficient for existence, not necessary: reported but never fatal.
    add("existence.width", k, width >= needed, width, needed, true);
    if (mode == ControlMode::Adapted) {
      add("design1", k, design1_holds(l.pc_low, l.omega_off, droop_damping), l.pc_low,
          droop_damping * l.omega_off);
    }
  }

  if (mode == ControlMode::Optimal && !loads.empty()) {
    const auto order = cost_rank_order(loads);
    double delta = loads[0].magnitude;
    for (const auto& l : loads) delta = std::min(delta, l.magnitude);
    double cumulative = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::size_t k = order[r];
      const auto& l = loads[k];
      const double ratio = l.cost / l.magnitude;
      add("design2.omega_off", k, l.cost > 0.0 && detail::nearly_equal(l.omega_off, ratio),
          l.omega_off, ratio);
      const double ladder = droop_damping * l.omega_off + cumulative;
      add("design2.pc_low", k, detail::nearly_equal(l.pc_low, ladder), l.pc_low, ladder);
      add("design2.pc_high", k, l.pc_high > l.pc_low && l.pc_high < l.pc_low + delta, l.pc_high,
          l.pc_low + delta);
      cumulative += l.magnitude;
    }
  }
  return report;
}

}  // namespace hyload

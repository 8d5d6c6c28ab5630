#pragma once

// Equilibria: the common steady-state frequency, full-state reconstruction,
// the constructive existence search for hysteretic loads, and the equilibrium
// sets of the power-command-gated schemes.

#include <hyload/control.hpp>
#include <hyload/error.hpp>
#include <hyload/grid.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hyload {

struct EquilibriumPoint {
  double omega = 0.0;             // common to every bus
  std::vector<int> sigma;         // per controllable load
  std::vector<double> bus_demand; // d^c per bus
  Eigen::VectorXd pm;             // -alpha_j * omega
  Eigen::VectorXd du;             // A_j * omega
  Eigen::VectorXd eta;
  Eigen::VectorXd flows;

  ContinuousState state(std::size_t bus_count) const {
    return {eta, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(bus_count), omega), pm};
  }
};

/// omega* = (-ell - dbar^T sigma) / D.
inline double equilibrium_frequency(double ell, std::span<const int> sigma, double droop_damping,
                                    std::span<const double> magnitude) {
  if (!(droop_damping > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "aggregate droop+damping must be > 0");
  }
  if (sigma.size() != magnitude.size()) {
    throw Error(ErrorKind::DimensionMismatch, "sigma and magnitudes differ in length");
  }
  double on = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) on += magnitude[k] * sigma[k];
  return (-ell - on) / droop_damping;
}

inline double equilibrium_frequency(double ell, std::span<const int> sigma, double droop_damping,
                                    std::span<const HysteresisConfig> loads) {
  std::vector<double> mag;
  for (const auto& l : loads) mag.push_back(l.magnitude);
  return equilibrium_frequency(ell, sigma, droop_damping, mag);
}

/// Assembles every state component from omega* and the per-bus controllable
/// demand, solving the line flows from the resulting injections.
inline EquilibriumPoint full_equilibrium(const NetworkModel& model, double omega,
                                         std::span<const double> bus_demand,
                                         std::vector<int> sigma = {}) {
  const std::size_t n = model.bus_count();
  if (bus_demand.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "one controllable demand per bus required");
  }
  EquilibriumPoint eq;
  eq.omega = omega;
  eq.sigma = std::move(sigma);
  eq.bus_demand.assign(bus_demand.begin(), bus_demand.end());
  eq.pm.resize(static_cast<Eigen::Index>(n));
  eq.du.resize(static_cast<Eigen::Index>(n));
  std::vector<double> injection(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    const auto& b = model.bus(j);
    eq.pm[i] = -b.droop * omega;
    eq.du[i] = b.damping * omega;
    injection[j] = -b.load + eq.pm[i] - bus_demand[j] - eq.du[i];
  }
  const PowerFlow pf = dc_power_flow(model, injection);
  eq.eta = pf.eta;
  eq.flows = pf.flows;
  return eq;
}

inline std::vector<double> bus_demand_of(std::size_t bus_count,
                                         std::span<const HysteresisConfig> loads,
                                         std::span<const int> sigma) {
  std::vector<double> d(bus_count, 0.0);
  for (std::size_t k = 0; k < loads.size(); ++k) {
    if (loads[k].bus >= bus_count) {
      throw Error(ErrorKind::InvalidParameter,
                  "load " + std::to_string(k + 1) + " references a missing bus");
    }
    d[loads[k].bus] += loads[k].magnitude * sigma[k];
  }
  return d;
}

namespace detail {

/// Model whose aggregate load equals ell; any difference lands on bus 0.
inline NetworkModel with_aggregate(const NetworkModel& model, double ell) {
  const double diff = ell - model.aggregate_load();
  if (diff == 0.0) return model;
  auto loads = model.loads();
  loads[0] += diff;
  return model.with_loads(loads);
}

inline bool sigma_consistent(double omega, double pc, std::span<const int> sigma,
                             std::span<const HysteresisConfig> loads, ControlMode mode) {
  for (std::size_t k = 0; k < loads.size(); ++k) {
    if (!in_flow_set(omega, pc, sigma[k], loads[k], mode)) return false;
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// constructive existence search

struct ExistenceStep {
  std::vector<int> sigma;
  double omega = 0.0;                  // omega-tilde at this step
  std::vector<std::size_t> violators;  // Pi_i
  std::optional<std::size_t> switched; // load switched on to reach the next step
};

struct WidthCheck {
  std::size_t load = 0;
  double width = 0.0;   // omega_on - omega_off
  double needed = 0.0;  // dbar / D
  bool passed = false;
};

struct ExistenceReport {
  std::vector<WidthCheck> width;
  bool width_condition = true;
  std::vector<ExistenceStep> trace;
  std::size_t iterations = 0;
  std::size_t initial_violators = 0;  // |Pi_0|
  bool constructive_success = false;
  bool exhaustive_checked = false;
  std::optional<EquilibriumPoint> equilibrium;
  std::string note;

  bool found() const { return equilibrium.has_value(); }
};

inline constexpr std::size_t kMaxCertificateLoads = 20;

/// Starts from all loads off and switches on, one at a time, the violating
/// load with the smallest off-threshold. If a switched-on load ends up
/// demanding off the construction fails; then every sigma is checked (up to
/// 20 loads) so that "no equilibrium" is a certificate rather than a guess.
inline ExistenceReport solve_hysteresis_equilibrium(const NetworkModel& model,
                                                    std::span<const HysteresisConfig> loads,
                                                    double ell, bool request_certificate = true) {
  const double D = model.droop_damping_sum();
  for (const auto& l : loads) {
    validate(l, ControlMode::Hysteresis);
    if (l.bus >= model.bus_count()) {
      throw Error(ErrorKind::InvalidParameter, "load references a missing bus");
    }
  }
  ExistenceReport rep;
  for (std::size_t k = 0; k < loads.size(); ++k) {
    WidthCheck w{k, loads[k].omega_on - loads[k].omega_off, loads[k].magnitude / D, false};
    w.passed = w.width >= w.needed;
    rep.width_condition = rep.width_condition && w.passed;
    rep.width.push_back(w);
  }

  const NetworkModel shifted = detail::with_aggregate(model, ell);
  auto finish = [&](const std::vector<int>& sigma, double omega) {
    rep.equilibrium =
        full_equilibrium(shifted, omega, bus_demand_of(model.bus_count(), loads, sigma), sigma);
  };

  std::vector<int> sigma(loads.size(), 0);
  double omega = -ell / D;
  bool failed = false;
  while (true) {
    ExistenceStep step{sigma, omega, {}, std::nullopt};
    for (std::size_t k = 0; k < loads.size(); ++k) {
      if (!in_flow_set(omega, 0.0, sigma[k], loads[k], ControlMode::Hysteresis)) {
        step.violators.push_back(k);
      }
    }
    if (rep.trace.empty()) rep.initial_violators = step.violators.size();
    if (step.violators.empty()) {
      rep.trace.push_back(std::move(step));
      rep.constructive_success = true;
      finish(sigma, omega);
      return rep;
    }
    const bool on_load_violates = std::any_of(step.violators.begin(), step.violators.end(),
                                              [&](std::size_t k) { return sigma[k] == 1; });
    if (on_load_violates) {
      rep.trace.push_back(std::move(step));
      failed = true;
      break;
    }
    std::size_t pick = step.violators.front();
    for (std::size_t k : step.violators) {
      if (loads[k].omega_off < loads[pick].omega_off) pick = k;
    }
    step.switched = pick;
    rep.trace.push_back(std::move(step));
    sigma[pick] = 1;
    omega -= loads[pick].magnitude / D;
    ++rep.iterations;
  }

  if (failed) {
    if (loads.size() > kMaxCertificateLoads) {
      if (request_certificate) {
        throw Error(ErrorKind::TooManyLoads,
                    "exhaustive certificate limited to " + std::to_string(kMaxCertificateLoads) +
                        " loads, got " + std::to_string(loads.size()));
      }
      rep.note = "construction failed; trace only (too many loads for an exhaustive check)";
      return rep;
    }
    rep.exhaustive_checked = true;
    const std::size_t n = loads.size();
    std::vector<int> s(n);
    for (unsigned long long mask = 0; mask < (1ULL << n); ++mask) {
      for (std::size_t k = 0; k < n; ++k) s[k] = static_cast<int>((mask >> k) & 1ULL);
      const double w = equilibrium_frequency(ell, s, D, loads);
      if (detail::sigma_consistent(w, 0.0, s, loads, ControlMode::Hysteresis)) {
        rep.note = "construction failed but an equilibrium exists";
        finish(s, w);
        return rep;
      }
    }
    rep.note = "no switch configuration is consistent with its equilibrium frequency";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// power-command-gated schemes

/// Equilibria with the centralized command pc = -ell. Adapted: loads with
/// pc <= pc_low off, the rest on. Optimal: the cost-ranked prefixes whose
/// sigma lies in the flow set (one, or two when pc falls in some
/// [pc_low, pc_high]).
inline std::vector<EquilibriumPoint> equilibria_adapted(const NetworkModel& model,
                                                        std::span<const HysteresisConfig> loads,
                                                        double ell, ControlMode mode) {
  if (mode != ControlMode::Adapted && mode != ControlMode::Optimal) {
    throw Error(ErrorKind::InvalidParameter, "equilibria_adapted needs the adapted or optimal mode");
  }
  for (const auto& l : loads) {
    validate(l, mode);
    if (l.bus >= model.bus_count()) {
      throw Error(ErrorKind::InvalidParameter, "load references a missing bus");
    }
  }
  const double D = model.droop_damping_sum();
  const DesignReport report = validate_design(loads, D, mode);
  if (!report.passed()) {
    const auto f = report.failures().front();
    throw Error(ErrorKind::DesignConditionViolated,
                f.condition + " fails for load " + std::to_string(f.load + 1) + " on bus " +
                    std::to_string(f.bus + 1));
  }
  const double pc = -ell;
  const NetworkModel shifted = detail::with_aggregate(model, ell);
  std::vector<std::vector<int>> candidates;
  if (mode == ControlMode::Adapted) {
    std::vector<int> s(loads.size());
    for (std::size_t k = 0; k < loads.size(); ++k) s[k] = pc <= loads[k].pc_low ? 0 : 1;
    candidates.push_back(std::move(s));
  } else {
    const auto order = cost_rank_order(loads);
    std::vector<int> s(loads.size(), 0);
    candidates.push_back(s);
    for (std::size_t k : order) {
      s[k] = 1;
      candidates.push_back(s);
    }
  }
  std::vector<EquilibriumPoint> out;
  for (const auto& s : candidates) {
    const double w = equilibrium_frequency(ell, s, D, loads);
    if (!detail::sigma_consistent(w, pc, s, loads, mode)) continue;
    out.push_back(full_equilibrium(shifted, w, bus_demand_of(model.bus_count(), loads, s), s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// static policy

struct StaticEquilibrium {
  EquilibriumPoint point;
  std::vector<double> load_demand;  // per static load
  std::vector<int> sliding;         // +1 upper surface, -1 lower, 0 regular
};

/// The total static demand is monotone in omega, so the balance
/// -ell - D*omega = sum d^c has exactly one solution: either inside an open
/// interval between thresholds or on a threshold with a sliding demand.
inline StaticEquilibrium static_equilibrium(const NetworkModel& model,
                                            std::span<const StaticSwitchConfig> loads) {
  for (const auto& c : loads) {
    validate(c);
    if (c.bus >= model.bus_count()) {
      throw Error(ErrorKind::InvalidParameter, "load references a missing bus");
    }
  }
  const double ell = model.aggregate_load();
  const double D = model.droop_damping_sum();
  std::vector<double> thresholds;
  for (const auto& c : loads) {
    thresholds.push_back(c.omega_upper);
    thresholds.push_back(c.omega_lower);
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  auto total_at = [&](double w) {
    double s = 0.0;
    for (const auto& c : loads) s += static_demand(w, c);
    return s;
  };

  StaticEquilibrium out;
  out.load_demand.assign(loads.size(), 0.0);
  out.sliding.assign(loads.size(), 0);
  auto assemble = [&](double w) {
    std::vector<double> bus(model.bus_count(), 0.0);
    for (std::size_t k = 0; k < loads.size(); ++k) bus[loads[k].bus] += out.load_demand[k];
    out.point = full_equilibrium(model, w, bus);
  };

  // open intervals (-inf, t0), (t0, t1), ..., (tm, inf)
  for (std::size_t i = 0; i <= thresholds.size(); ++i) {
    const double lo = i == 0 ? -INFINITY : thresholds[i - 1];
    const double hi = i == thresholds.size() ? INFINITY : thresholds[i];
    const double probe = std::isinf(lo) ? (std::isinf(hi) ? 0.0 : hi - 1.0)
                                        : (std::isinf(hi) ? lo + 1.0 : 0.5 * (lo + hi));
    const double w = (-ell - total_at(probe)) / D;
    if (w > lo && w < hi) {
      for (std::size_t k = 0; k < loads.size(); ++k) out.load_demand[k] = static_demand(w, loads[k]);
      assemble(w);
      return out;
    }
  }
  // on a threshold: the Filippov interval of the total demand must contain the residual
  for (double t : thresholds) {
    double lo = 0.0, hi = 0.0;
    for (const auto& c : loads) {
      const Interval iv = static_filippov_interval(t, c);
      lo += iv.lo;
      hi += iv.hi;
    }
    double residual = -ell - D * t;
    if (residual < lo - 1e-15 || residual > hi + 1e-15) continue;
    // singletons first, then spread what remains over surface loads in index order
    for (std::size_t k = 0; k < loads.size(); ++k) {
      const Interval iv = static_filippov_interval(t, loads[k]);
      out.load_demand[k] = iv.lo;
      residual -= iv.lo;
    }
    for (std::size_t k = 0; k < loads.size(); ++k) {
      const Interval iv = static_filippov_interval(t, loads[k]);
      if (iv.lo == iv.hi) continue;
      out.sliding[k] = t > 0.0 ? 1 : -1;
      const double add = std::clamp(residual, 0.0, iv.hi - iv.lo);
      out.load_demand[k] += add;
      residual -= add;
    }
    assemble(t);
    return out;
  }
  throw Error(ErrorKind::InvalidParameter, "static equilibrium search failed");
}

}  // namespace hyload

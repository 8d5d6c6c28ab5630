#pragma once

// Post-processing of simulated trajectories: chattering and limit-cycle
// detection, dwell times and Lyapunov monitoring.

#include <hyload/consensus.hpp>
#include <hyload/equilibrium.hpp>
#include <hyload/error.hpp>
#include <hyload/grid.hpp>
#include <hyload/hybrid.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hyload {

namespace detail {

inline std::vector<std::vector<double>> switch_times(const Trajectory& traj) {
  std::vector<std::vector<double>> t(traj.load_count);
  for (const auto& e : traj.events) t[e.load].push_back(e.t);
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// chattering

struct ChatteringOptions {
  std::size_t consecutive = 5;   // m
  double interval_factor = 5.0;  // an interval is "short" when <= factor * Ts
};

struct LoadChattering {
  std::size_t load = 0;
  std::size_t bus = 0;
  std::size_t switches = 0;
  std::optional<double> min_interval;
  std::size_t longest_short_run = 0;  // consecutive short intervals
  bool flagged = false;
};

struct ChatteringReport {
  double sampling_period = 0.0;
  ChatteringOptions options;
  std::vector<LoadChattering> loads;

  bool flagged() const {
    return std::any_of(loads.begin(), loads.end(), [](const auto& l) { return l.flagged; });
  }
};

inline ChatteringReport detect_chattering(const Trajectory& traj, double sampling_period,
                                          const ChatteringOptions& opt = {}) {
  if (!(sampling_period > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "sampling period must be > 0");
  }
  ChatteringReport rep{sampling_period, opt, {}};
  const auto times = detail::switch_times(traj);
  const double limit = opt.interval_factor * sampling_period * (1.0 + 1e-9);
  for (std::size_t k = 0; k < times.size(); ++k) {
    LoadChattering lc;
    lc.load = k;
    lc.bus = traj.load_bus[k];
    lc.switches = times[k].size();
    std::size_t run = 0;
    for (std::size_t i = 1; i < times[k].size(); ++i) {
      const double gap = times[k][i] - times[k][i - 1];
      lc.min_interval = std::min(lc.min_interval.value_or(gap), gap);
      run = gap <= limit ? run + 1 : 0;
      lc.longest_short_run = std::max(lc.longest_short_run, run);
    }
    lc.flagged = lc.longest_short_run >= opt.consecutive;
    rep.loads.push_back(lc);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// steady-state classification

struct LimitCycleOptions {
  std::size_t min_switches = 4;
  double omega_range = 1e-6;      // rad/s
  double derivative_tol = 1e-8;   // ||dx/dt||_inf for "converged"
};

enum class SteadyBehaviour { LimitCycle, Converged, Undetermined };

inline const char* to_string(SteadyBehaviour b) {
  switch (b) {
    case SteadyBehaviour::LimitCycle: return "limit-cycle";
    case SteadyBehaviour::Converged: return "converged";
    case SteadyBehaviour::Undetermined: return "undetermined";
  }
  return "?";
}

struct LimitCycleReport {
  SteadyBehaviour verdict = SteadyBehaviour::Undetermined;
  double window = 0.0;
  LimitCycleOptions options;
  std::optional<std::size_t> load;  // load that triggered the flag
  std::size_t max_switches_in_window = 0;
  double omega_range = 0.0;         // at the triggering (or busiest) load's bus
  double terminal_derivative = 0.0;

  bool flagged() const { return verdict == SteadyBehaviour::LimitCycle; }
};

/// Flags sustained switching with a non-trivial frequency swing over the
/// final window; otherwise classifies by the terminal derivative norm.
inline LimitCycleReport detect_limit_cycle(const Trajectory& traj, double window,
                                           const LimitCycleOptions& opt = {}) {
  const double T = traj.config.horizon;
  if (!(window > 0.0) || T < 2.0 * window) {
    throw Error(ErrorKind::InvalidParameter, "limit-cycle window must satisfy 0 < 2W <= horizon");
  }
  LimitCycleReport rep;
  rep.window = window;
  rep.options = opt;
  rep.terminal_derivative = traj.terminal_derivative_norm;
  const double start = T - window;
  std::vector<std::size_t> count(traj.load_count, 0);
  for (const auto& e : traj.events)
    if (e.t >= start) ++count[e.load];

  auto range_at = [&](std::size_t bus) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : traj.samples) {
      if (s.time.t < start) continue;
      const double w = s.x.omega[static_cast<Eigen::Index>(bus)];
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    return hi >= lo ? hi - lo : 0.0;
  };

  for (std::size_t k = 0; k < traj.load_count; ++k) {
    if (count[k] > rep.max_switches_in_window) rep.max_switches_in_window = count[k];
    if (count[k] < opt.min_switches) continue;
    const double r = range_at(traj.load_bus[k]);
    if (r > opt.omega_range) {
      rep.verdict = SteadyBehaviour::LimitCycle;
      rep.load = k;
      rep.omega_range = r;
      return rep;
    }
  }
  rep.verdict = rep.terminal_derivative < opt.derivative_tol ? SteadyBehaviour::Converged
                                                             : SteadyBehaviour::Undetermined;
  return rep;
}

// ---------------------------------------------------------------------------
// dwell times

struct LoadDwell {
  std::size_t load = 0;
  std::size_t bus = 0;
  std::size_t switches = 0;
  std::optional<double> consecutive;  // min t_{i+1} - t_i
  std::optional<double> two_apart;    // min t_{i+2} - t_i
};

/// Minimum gap between successive entries of a sorted switch-time list.
inline std::optional<double> min_gap(std::span<const double> times, std::size_t stride = 1) {
  std::optional<double> m;
  for (std::size_t i = stride; i < times.size(); ++i) {
    const double g = times[i] - times[i - stride];
    m = std::min(m.value_or(g), g);
  }
  return m;
}

/// One entry per load that switched at least once.
inline std::vector<LoadDwell> min_dwell(const Trajectory& traj) {
  std::vector<LoadDwell> out;
  const auto times = detail::switch_times(traj);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k].empty()) continue;
    LoadDwell d{k, traj.load_bus[k], times[k].size(), min_gap(times[k], 1), std::nullopt};
    if (traj.distributed) d.two_apart = min_gap(times[k], 2);
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lyapunov monitoring

struct LyapunovReference {
  ContinuousState x;  // equilibrium (eta*, omega*, p^M*)
  std::optional<Eigen::VectorXd> pc;
  std::optional<Eigen::VectorXd> psi;
};

inline LyapunovReference lyapunov_reference(const EquilibriumPoint& eq, std::size_t bus_count) {
  return {eq.state(bus_count), std::nullopt, std::nullopt};
}

struct LyapunovOptions {
  std::optional<double> settle_time;  // default: time of the last jump
  std::optional<double> tolerance;    // default: 10 * dt * L * V(settle)
};

struct LyapunovReport {
  std::vector<double> t;
  std::vector<double> v;
  double settle_time = 0.0;
  double tolerance = 0.0;
  double max_increase = 0.0;  // largest V(k+1) - V(k) over flow steps after settling
  double max_jump_change = 0.0;
  bool nonincreasing = true;
  bool jumps_preserve = true;
};

/// V = 1/2 sum M (w - w*)^2 + 1/2 sum B (eta - eta*)^2 + 1/2 sum (tau/alpha) (pM - pM*)^2,
/// plus the averaging-protocol term when the trajectory carries (pc, psi).
/// The tau/alpha weight makes the governor cross term cancel for any droop.
inline double lyapunov_value(const NetworkModel& model, const Sample& s,
                             const LyapunovReference& ref, const CommGraph* comm = nullptr) {
  double v = 0.0;
  for (std::size_t j = 0; j < model.bus_count(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    const auto& b = model.bus(j);
    const double dw = s.x.omega[i] - ref.x.omega[i];
    const double dp = s.x.pm[i] - ref.x.pm[i];
    v += 0.5 * b.inertia * dw * dw + 0.5 * (b.time_constant / b.droop) * dp * dp;
  }
  for (std::size_t k = 0; k < model.line_count(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double de = s.x.eta[i] - ref.x.eta[i];
    v += 0.5 * model.lines()[k].susceptance * de * de;
  }
  if (comm && ref.pc && ref.psi && s.psi.size() == ref.psi->size()) {
    v += lyapunov_vc(*comm, {s.pc, s.psi}, *ref.pc, *ref.psi);
  }
  return v;
}

inline LyapunovReport lyapunov_series(const NetworkModel& model, const Trajectory& traj,
                                      const LyapunovReference& ref,
                                      const LyapunovOptions& opt = {},
                                      const CommGraph* comm = nullptr) {
  check_dimensions(model, ref.x);
  LyapunovReport rep;
  for (const auto& s : traj.samples) {
    rep.t.push_back(s.time.t);
    rep.v.push_back(lyapunov_value(model, s, ref, comm));
  }
  rep.settle_time = opt.settle_time.value_or(traj.events.empty() ? 0.0 : traj.events.back().t);
  std::optional<double> v_settle;
  for (std::size_t i = 0; i < rep.t.size(); ++i) {
    if (rep.t[i] >= rep.settle_time) {
      v_settle = rep.v[i];
      break;
    }
  }
  rep.tolerance = opt.tolerance.value_or(10.0 * traj.config.dt * traj.lipschitz_estimate *
                                         v_settle.value_or(0.0));
  for (std::size_t i = 1; i < rep.v.size(); ++i) {
    const auto& a = traj.samples[i - 1];
    const auto& b = traj.samples[i];
    const double dv = rep.v[i] - rep.v[i - 1];
    if (b.time.l != a.time.l && b.time.t == a.time.t) {
      rep.max_jump_change = std::max(rep.max_jump_change, std::abs(dv));
      continue;
    }
    if (a.time.t >= rep.settle_time) rep.max_increase = std::max(rep.max_increase, dv);
  }
  rep.nonincreasing = rep.max_increase <= rep.tolerance;
  rep.jumps_preserve = rep.max_jump_change < 1e-12;
  return rep;
}

}  // namespace hyload

#pragma once

// Hybrid-time simulation of the network with on-off loads.
//
// Flows are integrated with fixed-step RK4. Guard crossings are localized by
// bisection on the step length, after which the jump map is applied one load
// at a time (each jump increments the hybrid jump counter l and leaves the
// continuous state untouched). The static policy is handled either by
// zero-order-hold sampling or by single-surface Filippov sliding.

#include <hyload/consensus.hpp>
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

struct ControllerSet {
  ControlMode mode = ControlMode::Hysteresis;
  StaticSubMode static_mode = StaticSubMode::Sampled;
  double sampling_period = 0.01;
  std::vector<StaticSwitchConfig> static_loads;
  std::vector<HysteresisConfig> loads;
  /// When present the power command is produced by distributed averaging.
  std::optional<CommGraph> communication;

  std::size_t load_count() const {
    return mode == ControlMode::Static ? static_loads.size() : loads.size();
  }
  std::size_t load_bus(std::size_t k) const {
    return mode == ControlMode::Static ? static_loads.at(k).bus : loads.at(k).bus;
  }
  bool distributed() const { return communication.has_value(); }
};

struct HybridState {
  ContinuousState x;
  std::vector<int> sigma;
  std::optional<ConsensusState> consensus;

  static HybridState zero(const NetworkModel& model, const ControllerSet& c) {
    HybridState s{ContinuousState::zero(model), std::vector<int>(c.load_count(), 0), std::nullopt};
    if (c.communication) s.consensus = ConsensusState::zero(*c.communication);
    return s;
  }
};

/// Step change of the uncontrollable load at one bus.
struct Disturbance {
  double time = 0.0;
  std::size_t bus = 0;
  double delta = 0.0;

  bool operator==(const Disturbance&) const = default;
};

struct SimConfig {
  double horizon = 10.0;
  double dt = 1e-3;
  double event_tolerance = 1e-6;
  double output_period = 1e-2;
  std::size_t max_jumps = 1'000'000;

  bool operator==(const SimConfig&) const = default;
};

struct HybridTime {
  double t = 0.0;
  std::size_t l = 0;
};

struct Sample {
  HybridTime time;
  ContinuousState x;
  std::vector<int> sigma;
  Eigen::VectorXd pc;   // power command seen at each bus
  Eigen::VectorXd psi;  // consensus integrators (empty when centralized)
  std::vector<double> demand;  // per load
  std::vector<int> sliding;    // per static load: +1 upper, -1 lower, 0 none
};

struct SwitchEvent {
  double t = 0.0;
  std::size_t l = 0;  // jump counter after the event
  std::size_t load = 0;
  std::size_t bus = 0;
  int before = 0;
  int after = 0;
  Trigger trigger = Trigger::Frequency;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<SwitchEvent> events;
  SimConfig config;
  ControlMode mode = ControlMode::Hysteresis;
  StaticSubMode static_mode = StaticSubMode::Sampled;
  bool distributed = false;
  std::size_t bus_count = 0;
  std::size_t load_count = 0;
  std::vector<std::size_t> load_bus;
  double terminal_derivative_norm = 0.0;  // ||dx/dt||_inf at the final state
  double lipschitz_estimate = 0.0;        // ||Jacobian||_inf of the flow map

  const Sample& final_sample() const { return samples.back(); }
  std::size_t jump_count() const { return events.size(); }
};

namespace detail {

class HybridIntegrator {
 public:
  HybridIntegrator(const NetworkModel& model, const ControllerSet& ctl, const HybridState& init,
                   const SimConfig& cfg, std::span<const Disturbance> disturbances)
      : model_(model), ctl_(ctl), cfg_(cfg) {
    validate_inputs(init);
    n_ = static_cast<Eigen::Index>(model.bus_count());
    e_ = static_cast<Eigen::Index>(model.line_count());
    if (ctl.communication) {
      c_ = static_cast<Eigen::Index>(ctl.communication->link_count());
    }
    distributed_ = ctl.distributed();
    const Eigen::Index size = e_ + 2 * n_ + (distributed_ ? n_ + c_ : 0);
    z_.resize(size);
    z_.segment(0, e_) = init.x.eta;
    z_.segment(e_, n_) = init.x.omega;
    z_.segment(e_ + n_, n_) = init.x.pm;
    if (distributed_) {
      z_.segment(e_ + 2 * n_, n_) = init.consensus->pc;
      z_.segment(e_ + 3 * n_, c_) = init.consensus->psi;
    }
    sigma_ = init.sigma;
    sliding_.assign(ctl.load_count(), 0);
    loads_ = model.loads();
    disturbances_.assign(disturbances.begin(), disturbances.end());
    std::stable_sort(disturbances_.begin(), disturbances_.end(),
                     [](const Disturbance& a, const Disturbance& b) { return a.time < b.time; });
  }

  Trajectory run() {
    Trajectory traj;
    traj.config = cfg_;
    traj.mode = ctl_.mode;
    traj.static_mode = ctl_.static_mode;
    traj.distributed = distributed_;
    traj.bus_count = model_.bus_count();
    traj.load_count = ctl_.load_count();
    for (std::size_t k = 0; k < ctl_.load_count(); ++k) traj.load_bus.push_back(ctl_.load_bus(k));
    traj.lipschitz_estimate = lipschitz_estimate();
    traj_ = &traj;

    const double T = cfg_.horizon;
    const double dt = cfg_.dt;
    const auto out_every =
        std::max<long long>(1, std::llround(cfg_.output_period / cfg_.dt));
    long long grid = 0;
    std::size_t next_sample = 0;

    apply_disturbances_up_to(0.0);
    if (is_sampled()) {
      sample_static(0.0);
      next_sample = 1;
    }
    if (is_filippov()) init_filippov();
    record(0.0);
    if (is_hybrid()) process_jumps(0.0);

    double t = 0.0;
    while (t < T) {
      const double t_grid = std::min(static_cast<double>(grid + 1) * dt, T);
      double t_next = t_grid;
      if (next_dist_ < disturbances_.size()) {
        t_next = std::min(t_next, disturbances_[next_dist_].time);
      }
      double t_sample = INFINITY;
      if (is_sampled()) {
        t_sample = static_cast<double>(next_sample) * ctl_.sampling_period;
        t_next = std::min(t_next, t_sample);
      }
      const double h = t_next - t;
      if (h > 0.0) {
        Eigen::VectorXd z1 = rk4(z_, h);
        check_finite(z1, t_next);
        if (is_hybrid() && any_jump(z1)) {
          const double tau = bisect(h, [this](const Eigen::VectorXd& z) { return any_jump(z); });
          z_ = rk4(z_, tau);
          t += tau;
          process_jumps(t);
          continue;
        }
        if (is_filippov() && filippov_event(z1)) {
          const double tau =
              bisect(h, [this](const Eigen::VectorXd& z) { return filippov_event(z); });
          z_ = rk4(z_, tau);
          t += tau;
          handle_filippov(t);
          continue;
        }
        z_ = std::move(z1);
      }
      t = t_next;
      bool recorded = false;
      if (t == t_grid) {
        ++grid;
        if (grid % out_every == 0 || t >= T) {
          record(t);
          recorded = true;
        }
      }
      if (next_dist_ < disturbances_.size() && disturbances_[next_dist_].time <= t) {
        apply_disturbances_up_to(t);
        if (is_filippov()) check_surface_entry(t);
        if (is_hybrid()) process_jumps(t);
      }
      if (is_sampled() && t == t_sample) {
        sample_static(t);
        ++next_sample;
      }
      if (t >= T && !recorded) record(t);
    }
    if (traj.samples.back().time.t < T) record(T);
    traj.terminal_derivative_norm = derivative(z_).cwiseAbs().maxCoeff();
    traj_ = nullptr;
    return traj;
  }

 private:
  bool is_hybrid() const { return ctl_.mode != ControlMode::Static; }
  bool is_sampled() const {
    return ctl_.mode == ControlMode::Static && ctl_.static_mode == StaticSubMode::Sampled;
  }
  bool is_filippov() const {
    return ctl_.mode == ControlMode::Static && ctl_.static_mode == StaticSubMode::IdealFilippov;
  }

  void validate_inputs(const HybridState& init) const {
    if (!(cfg_.horizon > 0.0) || !(cfg_.dt > 0.0) || !(cfg_.event_tolerance > 0.0) ||
        cfg_.event_tolerance > cfg_.dt || !(cfg_.output_period > 0.0)) {
      throw Error(ErrorKind::InvalidParameter,
                  "simulation needs horizon > 0, dt > 0 and 0 < event_tolerance <= dt");
    }
    check_dimensions(model_, init.x);
    if (init.sigma.size() != ctl_.load_count()) {
      throw Error(ErrorKind::DimensionMismatch, "one switch state per controllable load required");
    }
    for (std::size_t k = 0; k < ctl_.load_count(); ++k) {
      if (ctl_.load_bus(k) >= model_.bus_count()) {
        throw Error(ErrorKind::InvalidParameter,
                    "load " + std::to_string(k + 1) + " references a missing bus");
      }
    }
    if (ctl_.mode == ControlMode::Static) {
      if (ctl_.static_mode == StaticSubMode::Sampled && !(ctl_.sampling_period > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "sampling period must be > 0");
      }
      for (const auto& c : ctl_.static_loads) validate(c);
    } else {
      for (const auto& c : ctl_.loads) validate(c, ctl_.mode);
      for (int s : init.sigma) {
        if (s != 0 && s != 1) throw Error(ErrorKind::InvalidParameter, "sigma must be binary");
      }
    }
    if (ctl_.communication) {
      if (ctl_.communication->bus_count() != model_.bus_count()) {
        throw Error(ErrorKind::DimensionMismatch, "communication graph size differs from network");
      }
      if (!init.consensus ||
          init.consensus->pc.size() != static_cast<Eigen::Index>(model_.bus_count()) ||
          init.consensus->psi.size() !=
              static_cast<Eigen::Index>(ctl_.communication->link_count())) {
        throw Error(ErrorKind::DimensionMismatch, "initial consensus state missing or mis-sized");
      }
    }
  }

  // -- power command and guards ------------------------------------------

  double central_pc() const {
    double ell = 0.0;
    for (double v : loads_) ell += v;
    return -ell;
  }

  double pc_at(const Eigen::VectorXd& z, std::size_t bus) const {
    return distributed_ ? z[e_ + 2 * n_ + static_cast<Eigen::Index>(bus)] : central_pc();
  }

  double omega_at(const Eigen::VectorXd& z, std::size_t bus) const {
    return z[e_ + static_cast<Eigen::Index>(bus)];
  }

  bool any_jump(const Eigen::VectorXd& z) const {
    for (std::size_t k = 0; k < ctl_.loads.size(); ++k) {
      const auto& c = ctl_.loads[k];
      if (in_jump_set(omega_at(z, c.bus), pc_at(z, c.bus), sigma_[k], c, ctl_.mode)) return true;
    }
    return false;
  }

  void process_jumps(double t) {
    bool recorded_pre = false;
    for (std::size_t k = 0; k < ctl_.loads.size(); ++k) {
      const auto& c = ctl_.loads[k];
      const double w = omega_at(z_, c.bus);
      const double pc = pc_at(z_, c.bus);
      if (!in_jump_set(w, pc, sigma_[k], c, ctl_.mode)) continue;
      if (!recorded_pre) {
        record(t);
        recorded_pre = true;
      }
      const int before = sigma_[k];
      sigma_[k] = jump_update(w, pc, before, c, ctl_.mode);
      log_event(t, k, before, sigma_[k], jump_trigger(w, pc, before, c));
      record(t);
    }
  }

  void log_event(double t, std::size_t k, int before, int after, Trigger trig) {
    ++l_;
    if (traj_->events.size() >= cfg_.max_jumps) {
      throw Error(ErrorKind::MaxJumpsExceeded,
                  "more than " + std::to_string(cfg_.max_jumps) + " jumps by t = " +
                      std::to_string(t));
    }
    traj_->events.push_back({t, l_, k, ctl_.load_bus(k), before, after, trig});
  }

  // -- static policy ----------------------------------------------------------

  /// Net power at a bus excluding controllable demand.
  double bus_residual(const Eigen::VectorXd& z, std::size_t bus) const {
    const auto j = static_cast<Eigen::Index>(bus);
    const auto& b = model_.bus(bus);
    double r = -loads_[bus] + z[e_ + n_ + j] - b.damping * z[e_ + j];
    const auto& lines = model_.lines();
    for (std::size_t k = 0; k < lines.size(); ++k) {
      const double p = lines[k].susceptance * z[static_cast<Eigen::Index>(k)];
      if (lines[k].from == bus) r -= p;
      if (lines[k].to == bus) r += p;
    }
    return r;
  }

  /// Demand each load draws at state z under the current discrete mode.
  std::vector<double> load_demand(const Eigen::VectorXd& z) const {
    const std::size_t m = ctl_.load_count();
    std::vector<double> d(m, 0.0);
    if (is_hybrid()) {
      for (std::size_t k = 0; k < m; ++k) d[k] = ctl_.loads[k].magnitude * sigma_[k];
      return d;
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (!sliding_[k]) d[k] = static_level_demand(sigma_[k], ctl_.static_loads[k]);
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (!sliding_[k]) continue;
      const std::size_t bus = ctl_.static_loads[k].bus;
      double other = 0.0;
      for (std::size_t q = 0; q < m; ++q) {
        if (q != k && ctl_.static_loads[q].bus == bus) other += d[q];
      }
      d[k] = bus_residual(z, bus) - other;
    }
    return d;
  }

  void sample_static(double t) {
    for (std::size_t k = 0; k < ctl_.static_loads.size(); ++k) {
      const auto& c = ctl_.static_loads[k];
      const int level = static_level(omega_at(z_, c.bus), c);
      if (level != sigma_[k]) {
        const int before = sigma_[k];
        sigma_[k] = level;
        log_event(t, k, before, level, Trigger::Frequency);
      }
    }
  }

  void init_filippov() {
    for (std::size_t k = 0; k < ctl_.static_loads.size(); ++k) {
      const auto& c = ctl_.static_loads[k];
      sigma_[k] = static_level(omega_at(z_, c.bus), c);
    }
    check_surface_entry(0.0);
  }

  /// Residual demand load k would need so that its bus frequency stays put.
  double required_demand(const Eigen::VectorXd& z, std::size_t k) const {
    const std::size_t bus = ctl_.static_loads[k].bus;
    const auto d = load_demand(z);
    double other = 0.0;
    for (std::size_t q = 0; q < d.size(); ++q) {
      if (q != k && ctl_.static_loads[q].bus == bus) other += d[q];
    }
    return bus_residual(z, bus) - other;
  }

  bool try_enter_sliding(std::size_t k, bool upper, double t) {
    const auto& c = ctl_.static_loads[k];
    const double r = required_demand(z_, k);
    const bool attracts = upper ? (r > 0.0 && r < c.demand_upper)
                                : (r < 0.0 && r > c.demand_lower);
    if (!attracts) return false;
    z_[e_ + static_cast<Eigen::Index>(c.bus)] = upper ? c.omega_upper : c.omega_lower;
    sliding_[k] = upper ? 1 : -1;
    const int level = upper ? 0 : -1;
    if (level != sigma_[k]) {
      const int before = sigma_[k];
      sigma_[k] = level;
      log_event(t, k, before, level, Trigger::Frequency);
    }
    return true;
  }

  void check_surface_entry(double t) {
    for (std::size_t k = 0; k < ctl_.static_loads.size(); ++k) {
      if (sliding_[k]) continue;
      const auto& c = ctl_.static_loads[k];
      const double w = omega_at(z_, c.bus);
      if (std::abs(w - c.omega_upper) <= 1e-12) {
        try_enter_sliding(k, true, t);
      } else if (std::abs(w - c.omega_lower) <= 1e-12) {
        try_enter_sliding(k, false, t);
      }
    }
  }

  bool filippov_event(const Eigen::VectorXd& z) const {
    for (std::size_t k = 0; k < ctl_.static_loads.size(); ++k) {
      const auto& c = ctl_.static_loads[k];
      if (sliding_[k]) {
        const double r = required_demand(z, k);
        const Interval iv = sliding_[k] > 0 ? Interval{0.0, c.demand_upper}
                                            : Interval{c.demand_lower, 0.0};
        if (!iv.contains(r, 1e-12)) return true;
      } else if (static_level(omega_at(z, c.bus), c) != sigma_[k]) {
        return true;
      }
    }
    return false;
  }

  void handle_filippov(double t) {
    record(t);
    for (std::size_t k = 0; k < ctl_.static_loads.size(); ++k) {
      const auto& c = ctl_.static_loads[k];
      if (sliding_[k]) {
        const double r = required_demand(z_, k);
        const bool upper = sliding_[k] > 0;
        const Interval iv = upper ? Interval{0.0, c.demand_upper} : Interval{c.demand_lower, 0.0};
        if (iv.contains(r, 1e-12)) continue;
        sliding_[k] = 0;
        int level;
        if (upper) {
          level = r > iv.hi ? 1 : 0;
        } else {
          level = r < iv.lo ? -1 : 0;
        }
        if (level != sigma_[k]) {
          const int before = sigma_[k];
          sigma_[k] = level;
          log_event(t, k, before, level, Trigger::Frequency);
        }
        continue;
      }
      const int level = static_level(omega_at(z_, c.bus), c);
      if (level == sigma_[k]) continue;
      const int lo = std::min(level, sigma_[k]);
      const int hi = std::max(level, sigma_[k]);
      if (hi - lo == 1 && try_enter_sliding(k, lo == 0, t)) continue;
      const int before = sigma_[k];
      sigma_[k] = level;
      log_event(t, k, before, level, Trigger::Frequency);
    }
    record(t);
  }

  // -- flows ------------------------------------------------------------

  Eigen::VectorXd derivative(const Eigen::VectorXd& z) const {
    Eigen::VectorXd dz(z.size());
    const auto demand = load_demand(z);
    std::vector<double> bus_demand(model_.bus_count(), 0.0);
    for (std::size_t k = 0; k < demand.size(); ++k) bus_demand[ctl_.load_bus(k)] += demand[k];

    const auto& lines = model_.lines();
    for (std::size_t k = 0; k < lines.size(); ++k) {
      dz[static_cast<Eigen::Index>(k)] = omega_at(z, lines[k].from) - omega_at(z, lines[k].to);
    }
    for (std::size_t j = 0; j < model_.bus_count(); ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      const auto& b = model_.bus(j);
      dz[e_ + i] = (bus_residual(z, j) - bus_demand[j]) / b.inertia;
      dz[e_ + n_ + i] = -(z[e_ + n_ + i] + b.droop * z[e_ + i]) / b.time_constant;
    }
    for (std::size_t k = 0; k < demand.size(); ++k) {
      if (!sliding_.empty() && sliding_[k]) dz[e_ + static_cast<Eigen::Index>(ctl_.load_bus(k))] = 0.0;
    }
    if (distributed_) {
      consensus_field_into(*ctl_.communication, z.segment(e_ + 2 * n_, n_),
                           z.segment(e_ + 3 * n_, c_), loads_, dz.segment(e_ + 2 * n_, n_),
                           dz.segment(e_ + 3 * n_, c_));
    }
    return dz;
  }

  Eigen::VectorXd rk4(const Eigen::VectorXd& z, double h) const {
    const Eigen::VectorXd k1 = derivative(z);
    const Eigen::VectorXd k2 = derivative(z + 0.5 * h * k1);
    const Eigen::VectorXd k3 = derivative(z + 0.5 * h * k2);
    const Eigen::VectorXd k4 = derivative(z + h * k3);
    return z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  template <typename Pred>
  double bisect(double h, Pred&& triggered) const {
    double lo = 0.0;
    double hi = h;
    while (hi - lo > cfg_.event_tolerance) {
      const double mid = 0.5 * (lo + hi);
      if (triggered(rk4(z_, mid))) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  }

  void check_finite(const Eigen::VectorXd& z, double t) const {
    if (!z.allFinite()) {
      throw Error(ErrorKind::NonfiniteState, "state became non-finite near t = " + std::to_string(t));
    }
  }

  void apply_disturbances_up_to(double t) {
    while (next_dist_ < disturbances_.size() && disturbances_[next_dist_].time <= t) {
      const auto& d = disturbances_[next_dist_];
      if (d.bus >= loads_.size()) {
        throw Error(ErrorKind::InvalidParameter, "disturbance references a missing bus");
      }
      loads_[d.bus] += d.delta;
      ++next_dist_;
    }
  }

  double lipschitz_estimate() const {
    double L = 2.0;
    std::vector<double> bsum(model_.bus_count(), 0.0);
    for (const auto& l : model_.lines()) {
      bsum[l.from] += l.susceptance;
      bsum[l.to] += l.susceptance;
    }
    for (std::size_t j = 0; j < model_.bus_count(); ++j) {
      const auto& b = model_.bus(j);
      L = std::max(L, (b.damping + 1.0 + bsum[j]) / b.inertia);
      L = std::max(L, (b.droop + 1.0) / b.time_constant);
    }
    if (distributed_) {
      const auto& g = *ctl_.communication;
      std::vector<double> deg(g.bus_count(), 0.0);
      for (const auto& l : g.links()) {
        deg[l.from] += 1.0;
        deg[l.to] += 1.0;
        L = std::max(L, 2.0 / l.gain);
      }
      for (std::size_t j = 0; j < g.bus_count(); ++j) {
        L = std::max(L, (1.0 / static_cast<double>(g.bus_count()) + deg[j]) / g.gamma_gain()[j]);
      }
    }
    return L;
  }

  void record(double t) {
    Sample s;
    s.time = {t, l_};
    s.x.eta = z_.segment(0, e_);
    s.x.omega = z_.segment(e_, n_);
    s.x.pm = z_.segment(e_ + n_, n_);
    s.sigma = sigma_;
    if (distributed_) {
      s.pc = z_.segment(e_ + 2 * n_, n_);
      s.psi = z_.segment(e_ + 3 * n_, c_);
    } else {
      s.pc = Eigen::VectorXd::Constant(n_, central_pc());
    }
    s.demand = load_demand(z_);
    s.sliding = sliding_;
    traj_->samples.push_back(std::move(s));
  }

  const NetworkModel& model_;
  const ControllerSet& ctl_;
  SimConfig cfg_;
  Eigen::Index n_ = 0, e_ = 0, c_ = 0;
  bool distributed_ = false;
  Eigen::VectorXd z_;
  std::vector<int> sigma_;
  std::vector<int> sliding_;
  std::vector<double> loads_;
  std::vector<Disturbance> disturbances_;
  std::size_t next_dist_ = 0;
  std::size_t l_ = 0;
  Trajectory* traj_ = nullptr;
};

}  // namespace detail

/// Integrates the closed loop on a hybrid time domain. Deterministic: the
/// same inputs always give the same trajectory.
inline Trajectory simulate(const NetworkModel& model, const ControllerSet& controllers,
                           const HybridState& initial, const SimConfig& config,
                           std::span<const Disturbance> disturbances = {}) {
  detail::HybridIntegrator integrator(model, controllers, initial, config, disturbances);
  return integrator.run();
}

}  // namespace hyload

#pragma once

// Linearized lossless network model: swing dynamics, first-order governors,
// frequency-dependent damping and DC power flow.

#include <hyload/error.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hyload {

struct BusParams {
  double inertia = 1.0;        // M_j
  double damping = 1.0;        // A_j
  double droop = 1.0;          // alpha_j
  double time_constant = 1.0;  // tau_j
  double load = 0.0;           // p^L_j, frequency independent
  double gen_cost = 1.0;       // c_j, quadratic generation cost

  bool operator==(const BusParams&) const = default;
};

/// Directed line i -> j; the orientation only fixes the sign of eta and p.
struct LineParams {
  std::size_t from = 0;
  std::size_t to = 0;
  double susceptance = 1.0;

  bool operator==(const LineParams&) const = default;
};

namespace detail {

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

/// Undirected connectivity over `n` vertices given edge endpoints.
template <typename Edges, typename Endpoints>
bool connected(std::size_t n, const Edges& edges, Endpoints endpoints) {
  if (n == 0) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::size_t components = n;
  for (const auto& e : edges) {
    auto [a, b] = endpoints(e);
    auto ra = find_root(parent, a);
    auto rb = find_root(parent, b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

inline void require_positive(double value, const std::string& what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorKind::InvalidParameter, what + " must be finite and > 0 (got " +
                                                 std::to_string(value) + ")");
  }
}

}  // namespace detail

class NetworkModel {
 public:
  NetworkModel() = default;

  std::size_t bus_count() const { return buses_.size(); }
  std::size_t line_count() const { return lines_.size(); }
  const std::vector<BusParams>& buses() const { return buses_; }
  const std::vector<LineParams>& lines() const { return lines_; }
  const BusParams& bus(std::size_t j) const { return buses_.at(j); }

  /// Sum over buses of (droop + damping).
  double droop_damping_sum() const { return droop_damping_sum_; }
  /// Sum over buses of the uncontrollable load.
  double aggregate_load() const { return aggregate_load_; }

  std::vector<double> loads() const {
    std::vector<double> out(buses_.size());
    for (std::size_t j = 0; j < buses_.size(); ++j) out[j] = buses_[j].load;
    return out;
  }

  /// Same network with a different uncontrollable load profile.
  NetworkModel with_loads(std::span<const double> loads) const {
    if (loads.size() != buses_.size()) {
      throw Error(ErrorKind::DimensionMismatch, "load vector has " + std::to_string(loads.size()) +
                                                    " entries for " +
                                                    std::to_string(buses_.size()) + " buses");
    }
    NetworkModel copy = *this;
    copy.aggregate_load_ = 0.0;
    for (std::size_t j = 0; j < loads.size(); ++j) {
      copy.buses_[j].load = loads[j];
      copy.aggregate_load_ += loads[j];
    }
    return copy;
  }

  bool operator==(const NetworkModel& other) const {
    return buses_ == other.buses_ && lines_ == other.lines_;
  }

  friend NetworkModel build_network(std::vector<BusParams> buses, std::vector<LineParams> lines);

 private:
  std::vector<BusParams> buses_;
  std::vector<LineParams> lines_;
  double droop_damping_sum_ = 0.0;
  double aggregate_load_ = 0.0;
};

inline NetworkModel build_network(std::vector<BusParams> buses, std::vector<LineParams> lines) {
  if (buses.empty()) throw Error(ErrorKind::InvalidParameter, "network needs at least one bus");
  for (std::size_t j = 0; j < buses.size(); ++j) {
    const auto& b = buses[j];
    const std::string where = " of bus " + std::to_string(j + 1);
    detail::require_positive(b.inertia, "inertia" + where);
    detail::require_positive(b.damping, "damping" + where);
    detail::require_positive(b.droop, "droop" + where);
    detail::require_positive(b.time_constant, "time_constant" + where);
    detail::require_positive(b.gen_cost, "gen_cost" + where);
    if (!std::isfinite(b.load)) {
      throw Error(ErrorKind::InvalidParameter, "load" + where + " must be finite");
    }
  }
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& l = lines[k];
    const std::string where = " of line " + std::to_string(k + 1);
    if (l.from >= buses.size() || l.to >= buses.size()) {
      throw Error(ErrorKind::InvalidParameter, "endpoint" + where + " references a missing bus");
    }
    if (l.from == l.to) throw Error(ErrorKind::InvalidParameter, "self loop" + where);
    detail::require_positive(l.susceptance, "susceptance" + where);
    for (std::size_t m = 0; m < k; ++m) {
      const auto& o = lines[m];
      if ((o.from == l.from && o.to == l.to) || (o.from == l.to && o.to == l.from)) {
        throw Error(ErrorKind::InvalidParameter,
                    "line" + where + " duplicates line " + std::to_string(m + 1));
      }
    }
  }
  if (!detail::connected(buses.size(), lines,
                         [](const LineParams& l) { return std::pair{l.from, l.to}; })) {
    throw Error(ErrorKind::DisconnectedGraph, "the network graph is not connected");
  }

  NetworkModel model;
  model.buses_ = std::move(buses);
  model.lines_ = std::move(lines);
  for (const auto& b : model.buses_) {
    model.droop_damping_sum_ += b.droop + b.damping;
    model.aggregate_load_ += b.load;
  }
  return model;
}

/// x = (eta, omega, p^M).
struct ContinuousState {
  Eigen::VectorXd eta;    // phase difference per line [rad]
  Eigen::VectorXd omega;  // frequency deviation per bus [rad/s]
  Eigen::VectorXd pm;     // mechanical power per bus [p.u.]

  static ContinuousState zero(const NetworkModel& model) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.line_count())),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.bus_count())),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.bus_count()))};
  }

  bool all_finite() const {
    return eta.allFinite() && omega.allFinite() && pm.allFinite();
  }

  double max_abs() const {
    double m = 0.0;
    if (eta.size()) m = std::max(m, eta.cwiseAbs().maxCoeff());
    if (omega.size()) m = std::max(m, omega.cwiseAbs().maxCoeff());
    if (pm.size()) m = std::max(m, pm.cwiseAbs().maxCoeff());
    return m;
  }
};

inline void check_dimensions(const NetworkModel& model, const ContinuousState& state) {
  const auto n = static_cast<Eigen::Index>(model.bus_count());
  const auto e = static_cast<Eigen::Index>(model.line_count());
  if (state.eta.size() != e || state.omega.size() != n || state.pm.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "state dimensions do not match " + std::to_string(n) + " buses / " +
                    std::to_string(e) + " lines");
  }
}

/// Net electrical power flowing into each bus through the lines.
inline Eigen::VectorXd line_inflow(const NetworkModel& model, const Eigen::VectorXd& eta) {
  Eigen::VectorXd inflow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.bus_count()));
  const auto& lines = model.lines();
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const double p = lines[k].susceptance * eta[static_cast<Eigen::Index>(k)];
    inflow[static_cast<Eigen::Index>(lines[k].from)] -= p;
    inflow[static_cast<Eigen::Index>(lines[k].to)] += p;
  }
  return inflow;
}

/// Flow map with an explicit uncontrollable load vector (time-varying disturbances).
inline ContinuousState flow_field(const NetworkModel& model, const ContinuousState& state,
                                  std::span<const double> demand, std::span<const double> loads) {
  check_dimensions(model, state);
  if (demand.size() != model.bus_count() || loads.size() != model.bus_count()) {
    throw Error(ErrorKind::DimensionMismatch, "demand/load vectors must have one entry per bus");
  }
  ContinuousState d;
  d.eta.resize(state.eta.size());
  const auto& lines = model.lines();
  for (std::size_t k = 0; k < lines.size(); ++k) {
    d.eta[static_cast<Eigen::Index>(k)] = state.omega[static_cast<Eigen::Index>(lines[k].from)] -
                                          state.omega[static_cast<Eigen::Index>(lines[k].to)];
  }
  const Eigen::VectorXd inflow = line_inflow(model, state.eta);
  d.omega.resize(state.omega.size());
  d.pm.resize(state.pm.size());
  for (std::size_t j = 0; j < model.bus_count(); ++j) {
    const auto& b = model.bus(j);
    const auto i = static_cast<Eigen::Index>(j);
    d.omega[i] = (-loads[j] + state.pm[i] - demand[j] - b.damping * state.omega[i] + inflow[i]) /
                 b.inertia;
    d.pm[i] = -(state.pm[i] + b.droop * state.omega[i]) / b.time_constant;
  }
  return d;
}

/// Time derivative of (eta, omega, p^M) given controllable demand per bus.
inline ContinuousState flow_field(const NetworkModel& model, const ContinuousState& state,
                                  std::span<const double> demand) {
  const auto loads = model.loads();
  return flow_field(model, state, demand, loads);
}

struct PowerFlow {
  Eigen::VectorXd eta;    // phase differences per line
  Eigen::VectorXd flows;  // B_ij * eta_ij per line
  Eigen::VectorXd angles; // bus angles, lowest-index bus grounded
};

inline constexpr double kBalanceTolerance = 1e-9;

/// Solves the weighted-Laplacian system for the given net injections.
inline PowerFlow dc_power_flow(const NetworkModel& model, std::span<const double> injections) {
  const std::size_t n = model.bus_count();
  if (injections.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "one injection per bus required");
  }
  const double total = std::accumulate(injections.begin(), injections.end(), 0.0);
  if (std::abs(total) > kBalanceTolerance) {
    throw Error(ErrorKind::UnbalancedInjections,
                "injections sum to " + std::to_string(total) + " p.u.");
  }
  PowerFlow out;
  out.angles = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (n > 1) {
    const auto m = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) rhs[i] = injections[static_cast<std::size_t>(i + 1)];
    for (const auto& l : model.lines()) {
      const auto a = static_cast<Eigen::Index>(l.from) - 1;
      const auto b = static_cast<Eigen::Index>(l.to) - 1;
      if (a >= 0) lap(a, a) += l.susceptance;
      if (b >= 0) lap(b, b) += l.susceptance;
      if (a >= 0 && b >= 0) {
        lap(a, b) -= l.susceptance;
        lap(b, a) -= l.susceptance;
      }
    }
    out.angles.tail(m) = lap.ldlt().solve(rhs);
  }
  const auto e = static_cast<Eigen::Index>(model.line_count());
  out.eta.resize(e);
  out.flows.resize(e);
  for (Eigen::Index k = 0; k < e; ++k) {
    const auto& l = model.lines()[static_cast<std::size_t>(k)];
    out.eta[k] = out.angles[static_cast<Eigen::Index>(l.from)] -
                 out.angles[static_cast<Eigen::Index>(l.to)];
    out.flows[k] = l.susceptance * out.eta[k];
  }
  return out;
}

}  // namespace hyload

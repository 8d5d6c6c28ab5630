#pragma once

// Distributed averaging of the power command: each bus integrates its local
// load and exchanges integrator states with its communication neighbours so
// that every local command converges to the network-wide value -sum(p^L).

#include <hyload/control.hpp>
#include <hyload/error.hpp>
#include <hyload/grid.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hyload {

struct CommLink {
  std::size_t from = 0;
  std::size_t to = 0;
  double gain = 1.0;  // gamma_ij

  bool operator==(const CommLink&) const = default;
};

/// Consensus gains are named gamma_gain to keep them apart from the
/// cost-per-unit ratio c^d / dbar used by the optimizer.
class CommGraph {
 public:
  CommGraph() = default;

  static CommGraph build(std::size_t bus_count, std::vector<CommLink> links,
                         std::vector<double> gamma_gain = {}) {
    if (gamma_gain.empty()) gamma_gain.assign(bus_count, 1.0);
    if (gamma_gain.size() != bus_count) {
      throw Error(ErrorKind::DimensionMismatch, "one consensus gain per bus required");
    }
    for (std::size_t j = 0; j < bus_count; ++j) {
      detail::require_positive(gamma_gain[j], "consensus gain of bus " + std::to_string(j + 1));
    }
    for (std::size_t k = 0; k < links.size(); ++k) {
      const auto& l = links[k];
      if (l.from >= bus_count || l.to >= bus_count || l.from == l.to) {
        throw Error(ErrorKind::InvalidParameter,
                    "communication link " + std::to_string(k + 1) + " has invalid endpoints");
      }
      detail::require_positive(l.gain, "gain of communication link " + std::to_string(k + 1));
    }
    if (!detail::connected(bus_count, links,
                           [](const CommLink& l) { return std::pair{l.from, l.to}; })) {
      throw Error(ErrorKind::DisconnectedGraph, "communication graph is not connected");
    }
    CommGraph g;
    g.bus_count_ = bus_count;
    g.links_ = std::move(links);
    g.gamma_gain_ = std::move(gamma_gain);
    return g;
  }

  std::size_t bus_count() const { return bus_count_; }
  std::size_t link_count() const { return links_.size(); }
  const std::vector<CommLink>& links() const { return links_; }
  const std::vector<double>& gamma_gain() const { return gamma_gain_; }

  bool operator==(const CommGraph&) const = default;

 private:
  std::size_t bus_count_ = 0;
  std::vector<CommLink> links_;
  std::vector<double> gamma_gain_;
};

struct ConsensusState {
  Eigen::VectorXd pc;   // per bus
  Eigen::VectorXd psi;  // per link

  static ConsensusState zero(const CommGraph& g) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.bus_count())),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.link_count()))};
  }
};

/// Writes the consensus derivative; inputs/outputs may be raw segments of a
/// larger packed state.
template <typename PcIn, typename PsiIn, typename PcOut, typename PsiOut>
void consensus_field_into(const CommGraph& g, const PcIn& pc, const PsiIn& psi,
                          std::span<const double> loads, PcOut&& dpc, PsiOut&& dpsi) {
  const double n = static_cast<double>(g.bus_count());
  for (std::size_t j = 0; j < g.bus_count(); ++j) {
    dpc[static_cast<Eigen::Index>(j)] = -loads[j] - pc[static_cast<Eigen::Index>(j)] / n;
  }
  const auto& links = g.links();
  for (std::size_t k = 0; k < links.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(links[k].from);
    const auto j = static_cast<Eigen::Index>(links[k].to);
    const double s = psi[static_cast<Eigen::Index>(k)];
    dpc[i] -= s;
    dpc[j] += s;
    dpsi[static_cast<Eigen::Index>(k)] = (pc[i] - pc[j]) / links[k].gain;
  }
  for (std::size_t j = 0; j < g.bus_count(); ++j) {
    dpc[static_cast<Eigen::Index>(j)] /= g.gamma_gain()[j];
  }
}

inline ConsensusState consensus_field(const CommGraph& g, const ConsensusState& s,
                                      std::span<const double> loads, std::size_t bus_count) {
  if (bus_count != g.bus_count() || loads.size() != g.bus_count() ||
      s.pc.size() != static_cast<Eigen::Index>(g.bus_count()) ||
      s.psi.size() != static_cast<Eigen::Index>(g.link_count())) {
    throw Error(ErrorKind::DimensionMismatch, "consensus state does not match the graph");
  }
  ConsensusState d{Eigen::VectorXd(s.pc.size()), Eigen::VectorXd(s.psi.size())};
  consensus_field_into(g, s.pc, s.psi, loads, d.pc, d.psi);
  return d;
}

/// Every local command equals -sum(p^L) at steady state.
inline Eigen::VectorXd consensus_steady_state(std::span<const double> loads) {
  double ell = 0.0;
  for (double v : loads) ell += v;
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(loads.size()), -ell);
}

/// Minimum-norm integrator states balancing every bus at the steady state.
/// Unique only on trees; on graphs with cycles any circulation may be added.
inline Eigen::VectorXd consensus_psi_reference(const CommGraph& g, std::span<const double> loads) {
  const auto n = static_cast<Eigen::Index>(g.bus_count());
  const auto m = static_cast<Eigen::Index>(g.link_count());
  if (m == 0) return Eigen::VectorXd::Zero(0);
  double ell = 0.0;
  for (double v : loads) ell += v;
  // inflow(psi)_j = sum_in psi - sum_out psi = p^L_j - ell / |N|
  Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& l = g.links()[static_cast<std::size_t>(k)];
    incidence(static_cast<Eigen::Index>(l.from), k) = -1.0;
    incidence(static_cast<Eigen::Index>(l.to), k) = 1.0;
  }
  Eigen::VectorXd rhs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    rhs[j] = loads[static_cast<std::size_t>(j)] - ell / static_cast<double>(n);
  }
  return incidence.completeOrthogonalDecomposition().solve(rhs);
}

inline double lyapunov_vc(const CommGraph& g, const ConsensusState& s,
                          const Eigen::VectorXd& pc_star, const Eigen::VectorXd& psi_star) {
  double v = 0.0;
  for (std::size_t j = 0; j < g.bus_count(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    const double d = s.pc[i] - pc_star[i];
    v += 0.5 * g.gamma_gain()[j] * d * d;
  }
  for (std::size_t k = 0; k < g.link_count(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double d = s.psi[i] - psi_star[i];
    v += 0.5 * g.links()[k].gain * d * d;
  }
  return v;
}

struct Assumption1Verdict {
  bool passed = true;
  double ell = 0.0;
  std::vector<double> excluded;  // -pc_low_j, -pc_high_j
  std::size_t nearest = 0;       // index into excluded of closest point
  double distance = 0.0;         // |ell - excluded[nearest]|
};

/// ell must avoid the finite set { -pc_low_j, -pc_high_j } by more than `band`.
inline Assumption1Verdict check_assumption1(double ell, std::span<const HysteresisConfig> loads,
                                            double band = 1e-9) {
  Assumption1Verdict v;
  v.ell = ell;
  for (const auto& l : loads) {
    v.excluded.push_back(-l.pc_low);
    v.excluded.push_back(-l.pc_high);
  }
  v.distance = INFINITY;
  for (std::size_t k = 0; k < v.excluded.size(); ++k) {
    const double d = std::abs(ell - v.excluded[k]);
    if (d < v.distance) {
      v.distance = d;
      v.nearest = k;
    }
  }
  v.passed = v.excluded.empty() || v.distance > band;
  return v;
}

struct ConsensusSample {
  double t = 0.0;
  ConsensusState state;
};

/// Standalone RK4 integration of the averaging protocol with constant loads.
inline std::vector<ConsensusSample> simulate_consensus(const CommGraph& g,
                                                       std::span<const double> loads,
                                                       ConsensusState initial, double horizon,
                                                       double dt = 1e-2,
                                                       double output_period = 0.1) {
  if (!(horizon > 0.0) || !(dt > 0.0) || !(output_period > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "horizon, dt and output_period must be > 0");
  }
  const auto n = static_cast<Eigen::Index>(g.bus_count());
  const auto m = static_cast<Eigen::Index>(g.link_count());
  if (initial.pc.size() != n || initial.psi.size() != m || loads.size() != g.bus_count()) {
    throw Error(ErrorKind::DimensionMismatch, "consensus state does not match the graph");
  }
  Eigen::VectorXd z(n + m);
  z << initial.pc, initial.psi;
  auto f = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd d(n + m);
    consensus_field_into(g, x.head(n), x.tail(m), loads, d.head(n), d.tail(m));
    return d;
  };
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(output_period / dt)));
  std::vector<ConsensusSample> out;
  out.push_back({0.0, initial});
  for (std::size_t k = 1; k <= steps; ++k) {
    const Eigen::VectorXd k1 = f(z);
    const Eigen::VectorXd k2 = f(z + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(z + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(z + dt * k3);
    z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.allFinite()) throw Error(ErrorKind::NonfiniteState, "consensus integration diverged");
    if (k % every == 0 || k == steps) {
      out.push_back({static_cast<double>(k) * dt, {z.head(n), z.tail(m)}});
    }
  }
  return out;
}

}  // namespace hyload

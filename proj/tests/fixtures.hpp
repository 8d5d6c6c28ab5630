#pragma once

// Shared test networks and random instance generators.

#include <hyload/hyload.hpp>

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

namespace fixtures {

using namespace hyload;

/// One bus with unit inertia, damping, droop and time constant (D = 2).
inline NetworkModel single_bus(double load) {
  BusParams b;
  b.load = load;
  return build_network({b}, {});
}

/// Two unit buses joined by a unit line (D = 4, alpha = 1/c).
inline NetworkModel two_bus(double load1, double load2) {
  BusParams a, b;
  a.load = load1;
  b.load = load2;
  return build_network({a, b}, {{0, 1, 1.0}});
}

/// Cost-ranked two-load instance: c^d = (0.001, 0.004), dbar = (0.2, 0.2).
inline std::vector<LoadSpec> two_load_specs() {
  return {{0, 0.001, 0.2, std::nullopt}, {1, 0.004, 0.2, std::nullopt}};
}

inline StaticSwitchConfig chattering_switch() {
  return {0, 0.05, -0.05, 0.2, 0.0};
}

inline HysteresisConfig cycling_load() {
  HysteresisConfig c;
  c.bus = 0;
  c.omega_off = 0.04;
  c.omega_on = 0.06;
  c.magnitude = 0.1;
  return c;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random spanning tree plus a few extra edges, no duplicates.
inline std::vector<std::pair<std::size_t, std::size_t>> random_connected_edges(
    std::mt19937_64& rng, std::size_t n, double extra_density = 0.3) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent = perm[uniform_index(rng, 0, i - 1)];
    if (uniform(rng, 0, 1) < 0.5) {
      edges.push_back({perm[i], parent});
    } else {
      edges.push_back({parent, perm[i]});
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (uniform(rng, 0, 1) >= extra_density / static_cast<double>(n)) continue;
      const bool present = std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
        return (e.first == a && e.second == b) || (e.first == b && e.second == a);
      });
      if (!present) edges.push_back({a, b});
    }
  }
  return edges;
}

struct NetworkOptions {
  bool droop_from_cost = false;  // alpha_j = 1 / c_j
};

/// Random connected network with parameters in desk-scale ranges and a
/// random split of the aggregate load `ell` over the buses.
inline NetworkModel random_network(std::mt19937_64& rng, std::size_t n, double ell,
                                   NetworkOptions opt = {}) {
  std::vector<BusParams> buses(n);
  std::vector<double> w(n);
  for (auto& x : w) x = uniform(rng, 0.1, 1.0);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    auto& b = buses[j];
    b.inertia = uniform(rng, 0.5, 2.0);
    b.damping = uniform(rng, 0.5, 1.5);
    b.time_constant = uniform(rng, 0.5, 2.0);
    b.gen_cost = uniform(rng, 0.5, 2.0);
    b.droop = opt.droop_from_cost ? 1.0 / b.gen_cost : uniform(rng, 0.5, 1.5);
    b.load = ell * w[j] / wsum;
  }
  std::vector<LineParams> lines;
  for (auto [a, b] : random_connected_edges(rng, n)) lines.push_back({a, b, uniform(rng, 0.5, 2.0)});
  return build_network(std::move(buses), std::move(lines));
}

/// Hysteresis loads whose band is at least dbar / D wide.
inline std::vector<HysteresisConfig> random_wide_hysteresis(std::mt19937_64& rng,
                                                            std::size_t bus_count,
                                                            std::size_t load_count, double D) {
  std::vector<HysteresisConfig> loads(load_count);
  for (auto& c : loads) {
    c.bus = uniform_index(rng, 0, bus_count - 1);
    c.magnitude = uniform(rng, 0.02, 0.3);
    c.omega_off = uniform(rng, 0.005, 0.1);
    c.omega_on = c.omega_off + c.magnitude / D * uniform(rng, 1.0, 2.0);
  }
  return loads;
}

inline std::vector<LoadSpec> random_specs(std::mt19937_64& rng, std::size_t bus_count,
                                          std::size_t load_count) {
  std::vector<LoadSpec> specs(load_count);
  for (auto& s : specs) {
    s.bus = uniform_index(rng, 0, bus_count - 1);
    s.magnitude = uniform(rng, 0.05, 0.3);
    s.cost = s.magnitude * uniform(rng, 0.002, 0.05);
  }
  return specs;
}

inline std::vector<CommLink> random_comm_links(std::mt19937_64& rng, std::size_t n) {
  std::vector<CommLink> links;
  for (auto [a, b] : random_connected_edges(rng, n, 1.5)) links.push_back({a, b, uniform(rng, 0.5, 2.0)});
  return links;
}

}  // namespace fixtures

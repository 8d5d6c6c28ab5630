#pragma once

// Optimal supply and on-off load allocation: exact enumeration, a genetic
// heuristic, the continuous relaxation solved through its KKT breakpoints,
// and the suboptimality certificate for equilibria of the optimal scheme.

#include <hyload/control.hpp>
#include <hyload/error.hpp>
#include <hyload/grid.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hyload {

struct OslcLoad {
  std::size_t bus = 0;
  double cost = 0.0;       // c^d
  double magnitude = 0.0;  // dbar

  double gamma_cost() const { return cost / magnitude; }
  bool operator==(const OslcLoad&) const = default;
};

struct OslcInstance {
  std::vector<double> gen_cost;  // c_j
  std::vector<double> damping;   // A_j
  std::vector<double> droop;     // alpha_j
  std::vector<double> loads;     // p^L_j
  std::vector<OslcLoad> on_off;

  static OslcInstance from(const NetworkModel& model, std::vector<OslcLoad> on_off) {
    OslcInstance inst;
    for (const auto& b : model.buses()) {
      inst.gen_cost.push_back(b.gen_cost);
      inst.damping.push_back(b.damping);
      inst.droop.push_back(b.droop);
      inst.loads.push_back(b.load);
    }
    for (const auto& l : on_off) {
      if (l.bus >= model.bus_count()) {
        throw Error(ErrorKind::InvalidParameter, "on-off load references a missing bus");
      }
      detail::require_positive(l.cost, "on-off load cost");
      detail::require_positive(l.magnitude, "on-off load magnitude");
    }
    inst.on_off = std::move(on_off);
    return inst;
  }

  static OslcInstance from(const NetworkModel& model, std::span<const HysteresisConfig> loads) {
    std::vector<OslcLoad> v;
    for (const auto& l : loads) v.push_back({l.bus, l.cost, l.magnitude});
    return from(model, std::move(v));
  }

  std::size_t load_count() const { return on_off.size(); }
  double ell() const { return std::accumulate(loads.begin(), loads.end(), 0.0); }
  double droop_damping() const {
    double d = 0.0;
    for (std::size_t j = 0; j < droop.size(); ++j) d += droop[j] + damping[j];
    return d;
  }
  /// Static frequency sensitivity of the optimal allocation, sum(1/c_j + A_j).
  /// Equals droop_damping() exactly when alpha_j = 1/c_j.
  double sensitivity() const {
    double s = 0.0;
    for (std::size_t j = 0; j < gen_cost.size(); ++j) s += 1.0 / gen_cost[j] + damping[j];
    return s;
  }
  bool droop_matches_cost(double rel_tol = 1e-12) const {
    for (std::size_t j = 0; j < droop.size(); ++j) {
      const double inv = 1.0 / gen_cost[j];
      if (std::abs(droop[j] - inv) > rel_tol * std::max(1.0, std::abs(inv))) return false;
    }
    return true;
  }
};

struct OslcSolution {
  std::vector<int> sigma;
  double lambda = 0.0;  // optimal frequency deviation for this sigma
  std::vector<double> pm;
  std::vector<double> du;
  double cost = 0.0;
  std::string solver;  // "brute", "ga", "fixed"
};

/// Continuous-optimal cost for a fixed switch vector:
/// (ell + dbar^T sigma)^2 / (2 S) + sum c^d sigma.
inline double cost_of(std::span<const int> sigma, const OslcInstance& inst) {
  if (sigma.size() != inst.load_count()) {
    throw Error(ErrorKind::DimensionMismatch, "sigma length differs from the on-off load count");
  }
  double on = 0.0, discrete = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    on += inst.on_off[k].magnitude * sigma[k];
    discrete += inst.on_off[k].cost * sigma[k];
  }
  const double r = inst.ell() + on;
  return 0.5 * r * r / inst.sensitivity() + discrete;
}

inline OslcSolution solution_for(std::vector<int> sigma, const OslcInstance& inst,
                                 std::string solver) {
  OslcSolution s;
  double on = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) on += inst.on_off[k].magnitude * sigma[k];
  s.lambda = (-inst.ell() - on) / inst.sensitivity();
  for (std::size_t j = 0; j < inst.gen_cost.size(); ++j) {
    s.pm.push_back(-s.lambda / inst.gen_cost[j]);
    s.du.push_back(inst.damping[j] * s.lambda);
  }
  s.cost = cost_of(sigma, inst);
  s.sigma = std::move(sigma);
  s.solver = std::move(solver);
  return s;
}

/// Total generation minus demand; zero for every solution built here.
inline double balance_residual(const OslcSolution& s, const OslcInstance& inst) {
  double r = 0.0;
  for (std::size_t j = 0; j < s.pm.size(); ++j) r += s.pm[j] - s.du[j] - inst.loads[j];
  for (std::size_t k = 0; k < s.sigma.size(); ++k) r -= inst.on_off[k].magnitude * s.sigma[k];
  return r;
}

inline constexpr std::size_t kMaxBruteForceLoads = 24;

/// Enumerates all 2^n switch vectors in Gray-code order. Costs equal to
/// within 1e-14 (relative) are ties, resolved to the lexicographically
/// smallest sigma.
inline OslcSolution solve_brute_force(const OslcInstance& inst) {
  const std::size_t n = inst.load_count();
  if (n > kMaxBruteForceLoads) {
    throw Error(ErrorKind::TooManyLoads, "exhaustive search limited to " +
                                             std::to_string(kMaxBruteForceLoads) + " loads, got " +
                                             std::to_string(n));
  }
  const double S = inst.sensitivity();
  const double ell = inst.ell();
  std::vector<int> sigma(n, 0), best(n, 0);
  double on = 0.0, discrete = 0.0;
  double best_cost = 0.5 * ell * ell / S;
  for (std::uint64_t i = 1; i < (std::uint64_t{1} << n); ++i) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(i));
    sigma[bit] ^= 1;
    const double sign = sigma[bit] ? 1.0 : -1.0;
    on += sign * inst.on_off[bit].magnitude;
    discrete += sign * inst.on_off[bit].cost;
    const double r = ell + on;
    const double c = 0.5 * r * r / S + discrete;
    const double tie = 1e-14 * std::max(1.0, std::abs(best_cost));
    if (c < best_cost - tie || (c <= best_cost + tie && sigma < best)) {
      best = sigma;
      best_cost = c;
    }
  }
  return solution_for(std::move(best), inst, "brute");
}

// ---------------------------------------------------------------------------
// relaxation

struct KktResiduals {
  double balance = 0.0;
  double generation = 0.0;      // max |c_j p^M_j + lambda|
  double damping = 0.0;         // max |d^u_j / A_j - lambda|
  double complementarity = 0.0; // max distance of d^c_j from the subdifferential rule

  double max() const { return std::max({balance, generation, damping, complementarity}); }
};

struct RelaxedSolution {
  double lambda = 0.0;
  std::vector<double> demand;  // d^c per on-off load, in [0, dbar]
  std::vector<double> pm;
  std::vector<double> du;
  double cost = 0.0;           // C^opt
  bool on_breakpoint = false;  // lambda equals some gamma_cost
  std::vector<std::size_t> breakpoint_loads;
};

/// Solves -S*lambda - ell = sum d^c(lambda) by scanning the sorted
/// cost-per-unit breakpoints. A fractional demand on a breakpoint is filled
/// into the tied loads in ascending index order.
inline RelaxedSolution solve_relaxed(const OslcInstance& inst) {
  const std::size_t n = inst.load_count();
  const double S = inst.sensitivity();
  const double ell = inst.ell();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inst.on_off[a].gamma_cost() < inst.on_off[b].gamma_cost();
  });

  RelaxedSolution sol;
  sol.demand.assign(n, 0.0);
  double on = 0.0;
  bool solved = false;
  std::size_t g = 0;
  while (g < n && !solved) {
    const double gamma = inst.on_off[order[g]].gamma_cost();
    std::size_t end = g;
    double group = 0.0;
    while (end < n && inst.on_off[order[end]].gamma_cost() == gamma) {
      group += inst.on_off[order[end]].magnitude;
      ++end;
    }
    const double below = (-ell - on) / S;
    if (below < gamma) {
      sol.lambda = below;
      solved = true;
      break;
    }
    double fractional = -S * gamma - ell - on;
    if (fractional <= group) {
      sol.lambda = gamma;
      sol.on_breakpoint = true;
      std::vector<std::size_t> tied(order.begin() + static_cast<std::ptrdiff_t>(g),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(tied.begin(), tied.end());
      for (std::size_t k : tied) {
        const double take = std::clamp(fractional, 0.0, inst.on_off[k].magnitude);
        sol.demand[k] = take;
        fractional -= take;
      }
      sol.breakpoint_loads = std::move(tied);
      solved = true;
      break;
    }
    for (std::size_t r = g; r < end; ++r) {
      sol.demand[order[r]] = inst.on_off[order[r]].magnitude;
    }
    on += group;
    g = end;
  }
  if (!solved) sol.lambda = (-ell - on) / S;

  double linear = 0.0;
  for (std::size_t k = 0; k < n; ++k) linear += inst.on_off[k].gamma_cost() * sol.demand[k];
  for (std::size_t j = 0; j < inst.gen_cost.size(); ++j) {
    sol.pm.push_back(-sol.lambda / inst.gen_cost[j]);
    sol.du.push_back(inst.damping[j] * sol.lambda);
  }
  sol.cost = 0.5 * S * sol.lambda * sol.lambda + linear;
  return sol;
}

inline KktResiduals kkt_residuals(const RelaxedSolution& sol, const OslcInstance& inst) {
  KktResiduals r;
  double bal = 0.0;
  for (std::size_t j = 0; j < inst.gen_cost.size(); ++j) {
    bal += sol.pm[j] - sol.du[j] - inst.loads[j];
    r.generation = std::max(r.generation, std::abs(inst.gen_cost[j] * sol.pm[j] + sol.lambda));
    r.damping = std::max(r.damping, std::abs(sol.du[j] / inst.damping[j] - sol.lambda));
  }
  for (std::size_t k = 0; k < inst.load_count(); ++k) {
    const auto& l = inst.on_off[k];
    const double d = sol.demand[k];
    bal -= d;
    double v;
    if (sol.lambda < l.gamma_cost()) {
      v = std::abs(d);
    } else if (sol.lambda > l.gamma_cost()) {
      v = std::abs(d - l.magnitude);
    } else {
      v = std::max({0.0, -d, d - l.magnitude});
    }
    r.complementarity = std::max(r.complementarity, v);
  }
  r.balance = std::abs(bal);
  return r;
}

/// Worst-case suboptimality of an equilibrium: max(dbar)^2 / (2 D); 0 with no loads.
inline double epsilon_bound(const OslcInstance& inst) {
  const double D = inst.droop_damping();
  if (!(D > 0.0)) throw Error(ErrorKind::InvalidParameter, "aggregate droop+damping must be > 0");
  double m = 0.0;
  for (const auto& l : inst.on_off) m = std::max(m, l.magnitude);
  return m * m / (2.0 * D);
}

struct OptimalityCertificate {
  double cost = 0.0;     // C* of the equilibrium switch vector
  double optimum = 0.0;  // exhaustive optimum
  std::vector<int> optimum_sigma;
  double gap = 0.0;
  double epsilon = 0.0;
  bool passed = false;
  RelaxedSolution relaxed;
  double q_hat = 0.0;              // sum(dbar*sigma - relaxed d^c)
  double relaxation_gap = 0.0;     // C* - C^opt
  double predicted_gap = 0.0;      // q_hat^2 / (2 S)
  bool droop_matches_cost = true;  // bound is only claimed when alpha_j = 1/c_j
};

inline OptimalityCertificate verify_equilibrium_optimality(std::span<const int> sigma,
                                                           const OslcInstance& inst) {
  OptimalityCertificate cert;
  const OslcSolution best = solve_brute_force(inst);
  cert.cost = cost_of(sigma, inst);
  cert.optimum = best.cost;
  cert.optimum_sigma = best.sigma;
  cert.gap = cert.cost - cert.optimum;
  cert.epsilon = epsilon_bound(inst);
  cert.passed = cert.gap <= cert.epsilon + 1e-12;
  cert.relaxed = solve_relaxed(inst);
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    cert.q_hat += inst.on_off[k].magnitude * sigma[k] - cert.relaxed.demand[k];
  }
  cert.relaxation_gap = cert.cost - cert.relaxed.cost;
  cert.predicted_gap = cert.q_hat * cert.q_hat / (2.0 * inst.sensitivity());
  cert.droop_matches_cost = inst.droop_matches_cost();
  return cert;
}

// ---------------------------------------------------------------------------
// genetic heuristic

struct GaOptions {
  std::size_t generations = 100;
  std::size_t population = 64;
  std::size_t tournament = 3;
  double crossover_rate = 0.9;
  double mutation_rate = 0.0;  // 0 selects 1/n
};

/// Bit-string GA with tournament selection, uniform crossover, per-bit
/// mutation and single-individual elitism. Deterministic for a given seed.
inline OslcSolution ga_solve(const OslcInstance& inst, std::uint64_t seed,
                             const GaOptions& opt = {}) {
  const std::size_t n = inst.load_count();
  if (n == 0) return solution_for({}, inst, "ga");
  if (opt.population < 2 || opt.tournament < 1) {
    throw Error(ErrorKind::InvalidParameter, "GA needs population >= 2 and tournament >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, opt.population - 1);
  const double mutation = opt.mutation_rate > 0.0 ? opt.mutation_rate : 1.0 / static_cast<double>(n);

  using Genome = std::vector<int>;
  std::vector<Genome> pop(opt.population, Genome(n));
  std::vector<double> fit(opt.population);
  for (auto& g : pop)
    for (auto& b : g) b = unit(rng) < 0.5 ? 1 : 0;
  for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = cost_of(pop[i], inst);

  auto better = [&](std::size_t a, std::size_t b) {
    return fit[a] < fit[b] || (fit[a] == fit[b] && pop[a] < pop[b]);
  };
  auto best_index = [&] {
    std::size_t b = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (better(i, b)) b = i;
    return b;
  };
  auto select = [&] {
    std::size_t w = pick(rng);
    for (std::size_t t = 1; t < opt.tournament; ++t) {
      const std::size_t c = pick(rng);
      if (better(c, w)) w = c;
    }
    return w;
  };

  for (std::size_t gen = 0; gen < opt.generations; ++gen) {
    std::vector<Genome> next;
    next.reserve(pop.size());
    next.push_back(pop[best_index()]);
    while (next.size() < pop.size()) {
      Genome child = pop[select()];
      const Genome& other = pop[select()];
      if (unit(rng) < opt.crossover_rate) {
        for (std::size_t k = 0; k < n; ++k)
          if (unit(rng) < 0.5) child[k] = other[k];
      }
      for (auto& b : child)
        if (unit(rng) < mutation) b ^= 1;
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = cost_of(pop[i], inst);
  }
  return solution_for(pop[best_index()], inst, "ga");
}

}  // namespace hyload

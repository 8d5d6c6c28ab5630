#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace hyload;

namespace {

HysteresisConfig load(double w0, double w1, double dbar) {
  HysteresisConfig c;
  c.omega_off = w0;
  c.omega_on = w1;
  c.magnitude = dbar;
  return c;
}

std::vector<HysteresisConfig> design2_fixture(std::optional<double> omega_on = std::nullopt) {
  auto specs = fixtures::two_load_specs();
  for (auto& s : specs) s.omega_on = omega_on;
  return make_design2(specs, 4.0).loads;
}

}  // namespace

TEST(EquilibriumFrequency, Substitution) {
  const std::vector<double> mag = {0.2, 0.2};
  EXPECT_DOUBLE_EQ(equilibrium_frequency(-0.4, std::vector<int>{0, 0}, 4.0, mag), 0.1);
  EXPECT_NEAR(equilibrium_frequency(-0.4, std::vector<int>{1, 1}, 4.0, mag), 0.0, 1e-17);
  EXPECT_DOUBLE_EQ(equilibrium_frequency(0.0, std::vector<int>{0, 0}, 4.0, mag), 0.0);
}

TEST(Existence, SwitchOnOnce) {
  const auto m = fixtures::single_bus(-0.21);
  const std::vector<HysteresisConfig> loads = {load(0.04, 0.1, 0.1)};
  const auto rep = solve_hysteresis_equilibrium(m, loads, -0.21);
  ASSERT_TRUE(rep.found());
  EXPECT_TRUE(rep.constructive_success);
  EXPECT_EQ(rep.iterations, 1u);
  EXPECT_NEAR(rep.trace.front().omega, 0.105, 1e-15);
  EXPECT_NEAR(rep.equilibrium->omega, 0.055, 1e-15);
  EXPECT_EQ(rep.equilibrium->sigma, std::vector<int>{1});
}

TEST(Existence, NoEquilibriumIsCertified) {
  const auto m = fixtures::single_bus(-0.13);
  const std::vector<HysteresisConfig> loads = {fixtures::cycling_load()};
  const auto rep = solve_hysteresis_equilibrium(m, loads, -0.13);
  EXPECT_FALSE(rep.found());
  EXPECT_FALSE(rep.width_condition);
  EXPECT_TRUE(rep.exhaustive_checked);
}

TEST(Existence, BalancedSystemNeedsNoSwitching) {
  const auto m = fixtures::single_bus(0.0);
  const std::vector<HysteresisConfig> loads = {load(0.04, 0.1, 0.1)};
  const auto rep = solve_hysteresis_equilibrium(m, loads, 0.0);
  ASSERT_TRUE(rep.found());
  EXPECT_EQ(rep.iterations, 0u);
  EXPECT_EQ(rep.equilibrium->omega, 0.0);
  EXPECT_EQ(rep.equilibrium->sigma, std::vector<int>{0});
}

TEST(Existence, TooManyLoadsWhenConstructionFails) {
  // the cycling load defeats the construction; the rest never switch
  const auto m = fixtures::single_bus(-0.13);
  std::vector<HysteresisConfig> loads(kMaxCertificateLoads + 1, load(1.0, 2.0, 0.01));
  loads[0] = fixtures::cycling_load();
  try {
    solve_hysteresis_equilibrium(m, loads, -0.13);
    FAIL() << "expected too-many-loads";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooManyLoads);
  }
  const auto rep = solve_hysteresis_equilibrium(m, loads, -0.13, false);
  EXPECT_FALSE(rep.found());
  EXPECT_FALSE(rep.constructive_success);
  EXPECT_FALSE(rep.exhaustive_checked);
}

TEST(Existence, WideBandsAlwaysYieldAnEquilibrium) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = fixtures::uniform_index(rng, 1, 4);
    const double ell = fixtures::uniform(rng, -1.0, 0.2);
    const auto m = fixtures::random_network(rng, n, ell);
    const auto loads = fixtures::random_wide_hysteresis(rng, n, fixtures::uniform_index(rng, 1, 5),
                                                        m.droop_damping_sum());
    const auto rep = solve_hysteresis_equilibrium(m, loads, ell);
    ASSERT_TRUE(rep.found());
    EXPECT_LE(rep.iterations, rep.initial_violators);
    const auto d = flow_field(m, rep.equilibrium->state(n), rep.equilibrium->bus_demand);
    EXPECT_LT(d.max_abs(), 1e-9);
  }
}

TEST(Adapted, OptimalFixtureHeavyLoad) {
  const auto m = fixtures::two_bus(-0.2, -0.2);
  const auto eqs = equilibria_adapted(m, design2_fixture(), -0.4, ControlMode::Optimal);
  ASSERT_EQ(eqs.size(), 1u);
  EXPECT_EQ(eqs[0].sigma, (std::vector<int>{1, 1}));
  EXPECT_NEAR(eqs[0].omega, 0.0, 1e-15);
}

TEST(Adapted, OptimalFixtureLightLoadDefaultOnThresholds) {
  // omega_on = 2 omega_off = 0.01 < 0.025 forces load 1 on, leaving one equilibrium
  const auto m = fixtures::two_bus(-0.05, -0.05);
  const auto eqs = equilibria_adapted(m, design2_fixture(), -0.1, ControlMode::Optimal);
  ASSERT_EQ(eqs.size(), 1u);
  EXPECT_EQ(eqs[0].sigma, (std::vector<int>{1, 0}));
  EXPECT_NEAR(eqs[0].omega, -0.025, 1e-15);
}

TEST(Adapted, OptimalFixtureLightLoadWideOnThresholds) {
  const auto m = fixtures::two_bus(-0.05, -0.05);
  const auto eqs = equilibria_adapted(m, design2_fixture(0.05), -0.1, ControlMode::Optimal);
  ASSERT_EQ(eqs.size(), 2u);
  std::vector<std::vector<int>> sig;
  for (const auto& e : eqs) {
    sig.push_back(e.sigma);
    EXPECT_NEAR(std::abs(e.omega), 0.025, 1e-15);
  }
  std::sort(sig.begin(), sig.end());
  EXPECT_EQ(sig[0], (std::vector<int>{0, 0}));
  EXPECT_EQ(sig[1], (std::vector<int>{1, 0}));
}

TEST(Adapted, LowCommandKeepsEverythingOff) {
  const auto m = fixtures::single_bus(-0.02);
  std::vector<HysteresisConfig> loads = {fixtures::cycling_load()};
  apply_design1(loads, 2.0);
  const auto eqs = equilibria_adapted(m, loads, -0.02, ControlMode::Adapted);
  ASSERT_EQ(eqs.size(), 1u);
  EXPECT_EQ(eqs[0].sigma, std::vector<int>{0});
  EXPECT_DOUBLE_EQ(eqs[0].omega, 0.01);
}

TEST(Adapted, DesignViolationRaises) {
  const auto m = fixtures::single_bus(-0.13);
  auto l = fixtures::cycling_load();
  l.pc_low = 0.09;
  const std::vector<HysteresisConfig> loads = {l};
  try {
    equilibria_adapted(m, loads, -0.13, ControlMode::Adapted);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DesignConditionViolated);
  }
}

TEST(FullEquilibrium, TwoBusTransfer) {
  const auto m = fixtures::two_bus(-0.3, -0.1);
  const std::vector<double> demand = {0.2, 0.2};
  const auto eq = full_equilibrium(m, 0.0, demand, {1, 1});
  EXPECT_NEAR(eq.pm.cwiseAbs().maxCoeff(), 0.0, 1e-17);
  EXPECT_NEAR(eq.du.cwiseAbs().maxCoeff(), 0.0, 1e-17);
  EXPECT_NEAR(std::abs(eq.flows[0]), 0.1, 1e-15);
  EXPECT_NEAR(std::abs(eq.eta[0]), 0.1, 1e-15);
  EXPECT_LT(flow_field(m, eq.state(2), demand).max_abs(), 1e-15);
}

TEST(FullEquilibrium, SingleBusDroopResponse) {
  const auto m = fixtures::single_bus(-0.2);
  const std::vector<double> demand = {0.0};
  const auto eq = full_equilibrium(m, 0.1, demand);
  EXPECT_DOUBLE_EQ(eq.pm[0], -0.1);
  EXPECT_DOUBLE_EQ(eq.du[0], 0.1);
  EXPECT_EQ(eq.eta.size(), 0);
}

TEST(StaticEquilibrium, SlidingOnUpperSurface) {
  const auto m = fixtures::single_bus(-0.15);
  const std::vector<StaticSwitchConfig> loads = {fixtures::chattering_switch()};
  const auto eq = static_equilibrium(m, loads);
  EXPECT_NEAR(eq.point.omega, 0.05, 1e-15);
  EXPECT_NEAR(eq.load_demand[0], 0.05, 1e-15);
  EXPECT_EQ(eq.sliding[0], 1);
}

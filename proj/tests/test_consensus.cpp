#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace hyload;

namespace {

CommGraph line2() { return CommGraph::build(2, {{0, 1, 1.0}}); }

}  // namespace

TEST(ConsensusField, ZeroStateFollowsLocalLoad) {
  const auto g = line2();
  const std::vector<double> loads = {0.3, 0.1};
  const auto d = consensus_field(g, ConsensusState::zero(g), loads, 2);
  EXPECT_DOUBLE_EQ(d.pc[0], -0.3);
  EXPECT_DOUBLE_EQ(d.pc[1], -0.1);
  EXPECT_DOUBLE_EQ(d.psi[0], 0.0);
}

TEST(ConsensusField, DisagreementDrivesIntegrator) {
  const auto g = CommGraph::build(2, {{0, 1, 2.0}});
  ConsensusState s = ConsensusState::zero(g);
  s.pc << 0.3, 0.1;
  const std::vector<double> loads = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(consensus_field(g, s, loads, 2).psi[0], 0.1);
}

TEST(ConsensusField, SteadyStateIsStationary) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = fixtures::uniform_index(rng, 2, 8);
    const auto g = CommGraph::build(n, fixtures::random_comm_links(rng, n));
    std::vector<double> loads(n);
    for (auto& v : loads) v = fixtures::uniform(rng, -0.5, 0.5);
    const ConsensusState s{consensus_steady_state(loads), consensus_psi_reference(g, loads)};
    const auto d = consensus_field(g, s, loads, n);
    EXPECT_LT(d.pc.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(d.psi.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ConsensusField, DimensionMismatch) {
  const auto g = line2();
  const std::vector<double> loads = {0.3, 0.1, 0.0};
  EXPECT_THROW(consensus_field(g, ConsensusState::zero(g), loads, 2), Error);
}

TEST(SteadyState, Values) {
  const std::vector<double> a = {0.3, 0.1};
  EXPECT_NEAR(consensus_steady_state(a)[0], -0.4, 1e-15);
  EXPECT_NEAR(consensus_steady_state(a)[1], -0.4, 1e-15);
  const std::vector<double> zero = {0.0, 0.0};
  EXPECT_EQ(consensus_steady_state(zero).cwiseAbs().maxCoeff(), 0.0);
  const std::vector<double> five = {-0.1, -0.05, -0.05, 0.0, 0.0};
  EXPECT_NEAR(consensus_steady_state(five).maxCoeff(), 0.2, 1e-15);
  EXPECT_NEAR(consensus_steady_state(five).minCoeff(), 0.2, 1e-15);
}

TEST(Graph, RejectsDisconnectedAndBadGains) {
  EXPECT_THROW(CommGraph::build(3, {{0, 1, 1.0}}), Error);
  EXPECT_THROW(CommGraph::build(2, {{0, 1, 0.0}}), Error);
  EXPECT_THROW(CommGraph::build(2, {{0, 1, 1.0}}, {1.0, -1.0}), Error);
}

TEST(Assumption1, Membership) {
  const auto d = make_design2(fixtures::two_load_specs(), 4.0).loads;
  EXPECT_TRUE(check_assumption1(0.4, d).passed);
  EXPECT_FALSE(check_assumption1(-0.12, d).passed);
  EXPECT_TRUE(check_assumption1(-0.12, std::vector<HysteresisConfig>{}).passed);
}

TEST(LyapunovVc, ZeroAtSteadyStateAndConstantForPsiOnly) {
  const auto g = line2();
  const std::vector<double> loads = {0.3, 0.1};
  const auto pc = consensus_steady_state(loads);
  const auto psi = consensus_psi_reference(g, loads);
  EXPECT_EQ(lyapunov_vc(g, {pc, psi}, pc, psi), 0.0);
  ConsensusState s{pc, psi};
  s.psi[0] += 0.05;
  const auto d = consensus_field(g, s, loads, 2);
  // pc rates differ but, instantaneously, Vc only sees the pc deviation, which is zero
  double vdot = 0.0;
  for (Eigen::Index j = 0; j < 2; ++j) vdot += g.gamma_gain()[j] * (s.pc[j] - pc[j]) * d.pc[j];
  vdot += g.links()[0].gain * (s.psi[0] - psi[0]) * d.psi[0];
  EXPECT_NEAR(vdot, 0.0, 1e-15);
}

TEST(Simulation, ConvergesAndVcNonincreasingOnRandomGraphs) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = fixtures::uniform_index(rng, 2, 6);
    const auto g = CommGraph::build(n, fixtures::random_comm_links(rng, n));
    std::vector<double> loads(n);
    for (auto& v : loads) v = fixtures::uniform(rng, -0.5, 0.5);
    const auto star = consensus_steady_state(loads);
    const auto psi = consensus_psi_reference(g, loads);
    const auto series = simulate_consensus(g, loads, ConsensusState::zero(g), 400.0, 0.01, 1.0);
    const double tol = 1e-12 * lyapunov_vc(g, series.front().state, star, psi);
    double prev = INFINITY;
    for (const auto& s : series) {
      const double v = lyapunov_vc(g, s.state, star, psi);
      EXPECT_LE(v, prev + tol);
      prev = v;
    }
    EXPECT_LT((series.back().state.pc - star).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Simulation, EmbeddedMatchesStandalone) {
  // distributed hybrid run whose loads never switch: the embedded estimator
  // must follow the standalone averaging protocol
  const auto m = fixtures::two_bus(-0.05, -0.05);
  ControllerSet c;
  c.mode = ControlMode::Optimal;
  auto l = make_design2(fixtures::two_load_specs(), 4.0).loads;
  for (auto& x : l) {
    x.omega_on = 10.0;
    x.pc_high = 10.0 + x.pc_low;
  }
  c.loads = l;
  const auto g = CommGraph::build(2, {{0, 1, 1.0}});
  c.communication = g;
  SimConfig cfg;
  cfg.horizon = 5.0;
  cfg.dt = 1e-3;
  cfg.output_period = 0.1;
  const auto traj = simulate(m, c, HybridState::zero(m, c), cfg);
  ASSERT_EQ(traj.jump_count(), 0u);
  const auto loads = m.loads();
  const auto ref = simulate_consensus(g, loads, ConsensusState::zero(g), 5.0, 1e-3, 0.1);
  ASSERT_EQ(ref.size(), traj.samples.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(ref[i].t, traj.samples[i].time.t, 1e-12);
    EXPECT_LT((ref[i].state.pc - traj.samples[i].pc).cwiseAbs().maxCoeff(), 1e-9);
  }
}

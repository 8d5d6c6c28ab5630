#pragma once

// Subcommand implementations behind the command-line tool. Every command
// writes its artifacts under the output directory and returns a summary
// whose "passed" flag decides the exit status.

#include <hyload/hyload.hpp>
#include <hyload/scenario.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace hyload {

enum class OutputFormat { Csv, Json };

struct RunOptions {
  std::filesystem::path out = ".";
  std::uint64_t seed = 1;
  OutputFormat format = OutputFormat::Csv;
};

struct CommandResult {
  Json summary;
  std::vector<std::filesystem::path> files;

  bool passed() const { return summary.value("passed", false); }
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline void write_file(const std::filesystem::path& p, const std::string& text,
                       std::vector<std::filesystem::path>& files) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidParameter, "cannot write " + p.string());
  f << text;
  files.push_back(p);
}

inline Json verdicts_json(const std::vector<std::pair<std::string, bool>>& v, Json& summary) {
  Json out = Json::object();
  bool all = true;
  for (const auto& [k, ok] : v) {
    out[k] = ok;
    all = all && ok;
  }
  summary["verdicts"] = out;
  summary["passed"] = all;
  return out;
}

inline Json design_json(const DesignReport& rep) {
  Json checks = Json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"condition", c.condition},
                      {"load", c.load + 1},
                      {"bus", c.bus + 1},
                      {"passed", c.passed},
                      {"informational", c.informational},
                      {"value", c.value},
                      {"bound", c.bound}});
  }
  Json failures = Json::array();
  for (const auto& c : rep.failures()) {
    failures.push_back("load " + std::to_string(c.load + 1) + " on bus " +
                       std::to_string(c.bus + 1) + " violates " + c.condition);
  }
  return {{"passed", rep.passed()}, {"checks", checks}, {"failures", failures}};
}

inline Json equilibrium_json(const EquilibriumPoint& eq) {
  return {{"omega", eq.omega},
          {"sigma", eq.sigma},
          {"bus_demand", eq.bus_demand},
          {"pm", vec_json(eq.pm)},
          {"du", vec_json(eq.du)},
          {"eta", vec_json(eq.eta)},
          {"flows", vec_json(eq.flows)}};
}

inline Json load_json(const HysteresisConfig& l) {
  return {{"bus", l.bus + 1},
          {"omega_off", l.omega_off},
          {"omega_on", l.omega_on},
          {"omega_off_hz", l.omega_off / (2.0 * std::numbers::pi)},
          {"omega_on_hz", l.omega_on / (2.0 * std::numbers::pi)},
          {"magnitude", l.magnitude},
          {"pc_low", l.pc_low},
          {"pc_high", l.pc_high},
          {"cost", l.cost}};
}

}  // namespace detail

/// Column header of the trajectory table.
inline std::vector<std::string> trajectory_columns(const Trajectory& traj) {
  std::vector<std::string> c = {"t", "l"};
  for (std::size_t j = 0; j < traj.bus_count; ++j) c.push_back("omega_" + std::to_string(j + 1));
  for (std::size_t k = 0; k < traj.load_count; ++k) c.push_back("sigma_" + std::to_string(k + 1));
  for (std::size_t j = 0; j < traj.bus_count; ++j) c.push_back("pM_" + std::to_string(j + 1));
  if (traj.distributed) {
    for (std::size_t j = 0; j < traj.bus_count; ++j) c.push_back("pc_" + std::to_string(j + 1));
  } else {
    c.push_back("pc");
  }
  return c;
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out;
  const auto cols = trajectory_columns(traj);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& s : traj.samples) {
    out += detail::num(s.time.t) + "," + std::to_string(s.time.l);
    for (Eigen::Index j = 0; j < s.x.omega.size(); ++j) out += "," + detail::num(s.x.omega[j]);
    for (int v : s.sigma) out += "," + std::to_string(v);
    for (Eigen::Index j = 0; j < s.x.pm.size(); ++j) out += "," + detail::num(s.x.pm[j]);
    if (traj.distributed) {
      for (Eigen::Index j = 0; j < s.pc.size(); ++j) out += "," + detail::num(s.pc[j]);
    } else {
      out += "," + detail::num(s.pc.size() ? s.pc[0] : 0.0);
    }
    out += "\n";
  }
  return out;
}

inline std::string events_csv(const Trajectory& traj) {
  std::string out = "t,l,load,bus,before,after,trigger\n";
  for (const auto& e : traj.events) {
    out += detail::num(e.t) + "," + std::to_string(e.l) + "," + std::to_string(e.load + 1) + "," +
           std::to_string(e.bus + 1) + "," + std::to_string(e.before) + "," +
           std::to_string(e.after) + "," + to_string(e.trigger) + "\n";
  }
  return out;
}

inline Json trajectory_json(const Trajectory& traj) {
  Json rows = Json::array();
  for (const auto& s : traj.samples) {
    Json r = Json::array({s.time.t, s.time.l});
    for (Eigen::Index j = 0; j < s.x.omega.size(); ++j) r.push_back(s.x.omega[j]);
    for (int v : s.sigma) r.push_back(v);
    for (Eigen::Index j = 0; j < s.x.pm.size(); ++j) r.push_back(s.x.pm[j]);
    if (traj.distributed) {
      for (Eigen::Index j = 0; j < s.pc.size(); ++j) r.push_back(s.pc[j]);
    } else {
      r.push_back(s.pc.size() ? s.pc[0] : 0.0);
    }
    rows.push_back(r);
  }
  Json events = Json::array();
  for (const auto& e : traj.events) {
    events.push_back({{"t", e.t},
                      {"l", e.l},
                      {"load", e.load + 1},
                      {"bus", e.bus + 1},
                      {"before", e.before},
                      {"after", e.after},
                      {"trigger", to_string(e.trigger)}});
  }
  return {{"columns", trajectory_columns(traj)}, {"rows", rows}, {"events", events}};
}

/// Largest change of the continuous state across any logged jump.
inline double jump_state_change(const Trajectory& traj) {
  double m = 0.0;
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    const auto& a = traj.samples[i - 1];
    const auto& b = traj.samples[i];
    if (a.time.t != b.time.t || a.time.l == b.time.l) continue;
    m = std::max({m, (a.x.omega - b.x.omega).cwiseAbs().maxCoeff(),
                  (a.x.pm - b.x.pm).cwiseAbs().maxCoeff()});
    if (a.x.eta.size()) m = std::max(m, (a.x.eta - b.x.eta).cwiseAbs().maxCoeff());
  }
  return m;
}

struct ExpectedEquilibria {
  std::vector<EquilibriumPoint> points;
  std::string note;
};

inline ExpectedEquilibria expected_equilibria(const ResolvedScenario& r) {
  ExpectedEquilibria out;
  const auto& m = r.final_model;
  const auto& c = r.controllers;
  try {
    switch (c.mode) {
      case ControlMode::Static:
        out.points.push_back(static_equilibrium(m, c.static_loads).point);
        break;
      case ControlMode::Hysteresis: {
        const auto rep = solve_hysteresis_equilibrium(m, c.loads, m.aggregate_load(), false);
        if (rep.equilibrium) out.points.push_back(*rep.equilibrium);
        out.note = rep.note;
        break;
      }
      case ControlMode::Adapted:
      case ControlMode::Optimal:
        out.points = equilibria_adapted(m, c.loads, m.aggregate_load(), c.mode);
        break;
    }
  } catch (const Error& e) {
    out.note = e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------

inline CommandResult run_simulate(const ScenarioDocument& doc, const RunOptions& opt) {
  const ResolvedScenario r = resolve(doc);
  const auto& c = r.controllers;
  const auto traj = simulate(r.model, c, HybridState::zero(r.model, c), doc.simulation,
                             doc.disturbances);
  CommandResult res;
  Json& s = res.summary;
  s["command"] = "simulate";
  s["scenario"] = doc.name;
  s["mode"] = to_string(c.mode);
  s["distributed"] = traj.distributed;
  const auto& fin = traj.final_sample();
  s["terminal"] = {{"t", fin.time.t},
                   {"l", fin.time.l},
                   {"omega", detail::vec_json(fin.x.omega)},
                   {"sigma", fin.sigma},
                   {"pc", detail::vec_json(fin.pc)},
                   {"derivative_norm", traj.terminal_derivative_norm}};
  s["integration"] = {{"dt", doc.simulation.dt},
                      {"event_tolerance", doc.simulation.event_tolerance},
                      {"jumps", traj.jump_count()},
                      {"samples", traj.samples.size()},
                      {"lipschitz_estimate", traj.lipschitz_estimate}};

  // equilibrium match
  const auto expected = expected_equilibria(r);
  std::optional<std::size_t> match;
  Json eqs = Json::array();
  for (std::size_t i = 0; i < expected.points.size(); ++i) {
    const auto& eq = expected.points[i];
    eqs.push_back({{"omega", eq.omega}, {"sigma", eq.sigma}});
    const double dw = (fin.x.omega.array() - eq.omega).abs().maxCoeff();
    const bool sigma_ok = c.mode == ControlMode::Static || fin.sigma == eq.sigma;
    if (!match && sigma_ok && dw < 1e-6) match = i;
  }
  s["equilibrium"] = {{"expected", eqs}, {"match", match.has_value()}, {"note", expected.note}};
  if (match) s["equilibrium"]["matched_index"] = *match;

  // diagnostics
  const auto& dg = doc.diagnostics;
  const double window = dg.limit_cycle_window.value_or(0.2 * doc.simulation.horizon);
  const auto cycle = detect_limit_cycle(
      traj, window, {dg.limit_cycle_switches, dg.limit_cycle_omega_range, 1e-8});
  s["limit_cycle"] = {{"verdict", to_string(cycle.verdict)},
                      {"window", window},
                      {"min_switches", dg.limit_cycle_switches},
                      {"omega_range_tolerance", dg.limit_cycle_omega_range},
                      {"max_switches_in_window", cycle.max_switches_in_window},
                      {"omega_range", cycle.omega_range}};
  const double ts = c.mode == ControlMode::Static ? c.sampling_period : doc.controller.sampling_period;
  const auto chat = detect_chattering(traj, ts, {dg.chattering_run, dg.chattering_factor});
  Json chat_loads = Json::array();
  for (const auto& l : chat.loads) {
    Json e = {{"load", l.load + 1}, {"bus", l.bus + 1}, {"switches", l.switches},
              {"flagged", l.flagged}, {"longest_short_run", l.longest_short_run}};
    e["min_interval"] = l.min_interval ? Json(*l.min_interval) : Json(nullptr);
    chat_loads.push_back(e);
  }
  s["chattering"] = {{"sampling_period", ts},
                     {"consecutive", dg.chattering_run},
                     {"interval_factor", dg.chattering_factor},
                     {"flagged", chat.flagged()},
                     {"loads", chat_loads}};
  Json dwell = Json::array();
  bool dwell_positive = true;
  for (const auto& d : min_dwell(traj)) {
    Json e = {{"load", d.load + 1}, {"bus", d.bus + 1}, {"switches", d.switches}};
    e["min_dwell"] = d.consecutive ? Json(*d.consecutive) : Json(nullptr);
    if (d.consecutive) dwell_positive = dwell_positive && *d.consecutive > 0.0;
    if (traj.distributed) {
      e["min_dwell_two_apart"] = d.two_apart ? Json(*d.two_apart) : Json(nullptr);
      if (d.two_apart) dwell_positive = dwell_positive && *d.two_apart > 0.0;
    }
    dwell.push_back(e);
  }
  s["dwell"] = dwell;

  // Lyapunov monitor around the equilibrium the run settled on
  const bool converged = cycle.verdict == SteadyBehaviour::Converged;
  std::optional<EquilibriumPoint> ref;
  if (match) {
    ref = expected.points[*match];
  } else if (converged && c.mode != ControlMode::Static) {
    const auto& m = r.final_model;
    const double w = equilibrium_frequency(m.aggregate_load(), fin.sigma, m.droop_damping_sum(),
                                           c.loads);
    ref = full_equilibrium(m, w, bus_demand_of(m.bus_count(), c.loads, fin.sigma), fin.sigma);
  }
  bool lyap_ok = true;
  if (ref) {
    auto lref = lyapunov_reference(*ref, r.model.bus_count());
    const CommGraph* comm = nullptr;
    if (c.communication) {
      comm = &*c.communication;
      const auto loads = r.final_model.loads();
      lref.pc = consensus_steady_state(loads);
      lref.psi = consensus_psi_reference(*comm, loads);
    }
    LyapunovOptions lo;
    lo.settle_time = dg.settle_time;
    if (!lo.settle_time && !doc.disturbances.empty()) {
      double last = 0.0;
      for (const auto& d : doc.disturbances) last = std::max(last, d.time);
      if (!traj.events.empty()) last = std::max(last, traj.events.back().t);
      lo.settle_time = last;
    }
    const auto ly = lyapunov_series(r.model, traj, lref, lo, comm);
    s["lyapunov"] = {{"settle_time", ly.settle_time},
                     {"tolerance", ly.tolerance},
                     {"max_increase", ly.max_increase},
                     {"max_jump_change", ly.max_jump_change},
                     {"nonincreasing", ly.nonincreasing},
                     {"final_value", ly.v.back()}};
    lyap_ok = !converged || ly.nonincreasing;
  } else {
    s["lyapunov"] = nullptr;
  }
  const double jump_change = jump_state_change(traj);
  s["jump_state_change"] = jump_change;
  if (c.mode != ControlMode::Static) s["design"] = detail::design_json(r.design);

  std::vector<std::pair<std::string, bool>> v = {
      {"jumps_preserve_state", jump_change == 0.0},
      {"dwell_positive", dwell_positive},
      {"lyapunov_nonincreasing", lyap_ok},
  };
  if (c.mode != ControlMode::Static) v.push_back({"design_conditions", r.design.passed()});
  if (doc.expect.converged) {
    v.push_back({"expect_converged", converged == *doc.expect.converged});
    if (*doc.expect.converged) v.push_back({"equilibrium_match", match.has_value()});
  }
  if (doc.expect.limit_cycle) v.push_back({"expect_limit_cycle", cycle.flagged() == *doc.expect.limit_cycle});
  if (doc.expect.chattering) v.push_back({"expect_chattering", chat.flagged() == *doc.expect.chattering});
  detail::verdicts_json(v, s);

  if (opt.format == OutputFormat::Csv) {
    detail::write_file(opt.out / "trajectory.csv", trajectory_csv(traj), res.files);
    detail::write_file(opt.out / "events.csv", events_csv(traj), res.files);
  } else {
    detail::write_file(opt.out / "trajectory.json", trajectory_json(traj).dump(1) + "\n", res.files);
  }
  detail::write_file(opt.out / "summary.json", s.dump(2) + "\n", res.files);
  return res;
}

inline CommandResult run_equilibrium(const ScenarioDocument& doc, const RunOptions& opt) {
  const ResolvedScenario r = resolve(doc);
  const auto& c = r.controllers;
  const auto& m = r.final_model;
  CommandResult res;
  Json& s = res.summary;
  s["command"] = "equilibrium";
  s["scenario"] = doc.name;
  s["mode"] = to_string(c.mode);
  s["aggregate_load"] = m.aggregate_load();
  s["droop_damping"] = m.droop_damping_sum();
  bool found = false;
  Json points = Json::array();
  switch (c.mode) {
    case ControlMode::Static: {
      const auto eq = static_equilibrium(m, c.static_loads);
      Json p = detail::equilibrium_json(eq.point);
      p["load_demand"] = eq.load_demand;
      p["sliding"] = eq.sliding;
      points.push_back(p);
      found = true;
      break;
    }
    case ControlMode::Hysteresis: {
      const auto rep = solve_hysteresis_equilibrium(m, c.loads, m.aggregate_load());
      Json trace = Json::array();
      for (const auto& st : rep.trace) {
        Json step = {{"omega", st.omega}, {"sigma", st.sigma}};
        Json viol = Json::array();
        for (auto k : st.violators) viol.push_back(k + 1);
        step["violators"] = viol;
        step["switched"] = st.switched ? Json(*st.switched + 1) : Json(nullptr);
        trace.push_back(step);
      }
      Json width = Json::array();
      for (const auto& w : rep.width) {
        width.push_back({{"load", w.load + 1}, {"width", w.width}, {"needed", w.needed},
                         {"passed", w.passed}});
      }
      s["existence"] = {{"width_condition", rep.width_condition},
                        {"width", width},
                        {"trace", trace},
                        {"iterations", rep.iterations},
                        {"initial_violators", rep.initial_violators},
                        {"constructive_success", rep.constructive_success},
                        {"exhaustive_checked", rep.exhaustive_checked},
                        {"note", rep.note}};
      if (rep.equilibrium) points.push_back(detail::equilibrium_json(*rep.equilibrium));
      found = rep.found();
      break;
    }
    case ControlMode::Adapted:
    case ControlMode::Optimal: {
      s["design"] = detail::design_json(r.design);
      if (!r.design.passed()) break;
      for (const auto& eq : equilibria_adapted(m, c.loads, m.aggregate_load(), c.mode)) {
        points.push_back(detail::equilibrium_json(eq));
      }
      found = !points.empty();
      break;
    }
  }
  s["equilibria"] = points;
  detail::verdicts_json({{"equilibrium_found", found}}, s);
  detail::write_file(opt.out / "equilibrium.json", s.dump(2) + "\n", res.files);
  return res;
}

inline CommandResult run_design(const ScenarioDocument& doc, const RunOptions& opt) {
  const ResolvedScenario r = resolve(doc);
  const auto& c = r.controllers;
  CommandResult res;
  Json& s = res.summary;
  s["command"] = "design";
  s["scenario"] = doc.name;
  s["mode"] = to_string(c.mode);
  s["droop_damping"] = r.model.droop_damping_sum();
  s["synthesis"] = doc.controller.synthesis ? Json(doc.controller.synthesis->rule) : Json(nullptr);
  if (c.mode == ControlMode::Static) {
    s["note"] = "static switching has no threshold synthesis";
    detail::verdicts_json({}, s);
  } else {
    Json loads = Json::array();
    for (const auto& l : c.loads) loads.push_back(detail::load_json(l));
    s["loads"] = loads;
    if (c.mode == ControlMode::Optimal) {
      Json rank = Json::array();
      for (auto k : cost_rank_order(c.loads)) rank.push_back(k + 1);
      s["rank_order"] = rank;
    }
    s["validation"] = detail::design_json(r.design);
    detail::verdicts_json({{"design_conditions", r.design.passed()}}, s);
  }
  detail::write_file(opt.out / "design.json", s.dump(2) + "\n", res.files);
  return res;
}

inline CommandResult run_optimize(const ScenarioDocument& doc, const RunOptions& opt) {
  const ResolvedScenario r = resolve(doc);
  const auto& c = r.controllers;
  if (c.mode == ControlMode::Static) {
    throw detail::validation("controller", "optimize needs hysteretic loads with costs");
  }
  for (std::size_t k = 0; k < c.loads.size(); ++k) {
    if (!(c.loads[k].cost > 0.0)) {
      throw detail::validation("controller.loads[" + std::to_string(k) + "]",
                               "optimize needs 'cost' > 0");
    }
  }
  const auto& m = r.final_model;
  const auto inst = OslcInstance::from(m, std::span<const HysteresisConfig>(c.loads));
  CommandResult res;
  Json& s = res.summary;
  s["command"] = "optimize";
  s["scenario"] = doc.name;
  s["aggregate_load"] = inst.ell();
  s["droop_damping"] = inst.droop_damping();
  s["sensitivity"] = inst.sensitivity();
  s["droop_matches_cost"] = inst.droop_matches_cost();
  if (!inst.droop_matches_cost()) {
    s["warning"] = "droop differs from 1/gen_cost on some bus; the suboptimality bound is not claimed";
  }
  auto sol_json = [](const OslcSolution& sol) {
    return Json{{"solver", sol.solver}, {"sigma", sol.sigma}, {"cost", sol.cost},
                {"lambda", sol.lambda}, {"pm", sol.pm}, {"du", sol.du}};
  };
  const auto brute = solve_brute_force(inst);
  s["brute_force"] = sol_json(brute);
  s["brute_force"]["balance_residual"] = balance_residual(brute, inst);
  GaOptions ga;
  std::size_t gens = 100, pop = 64;
  if (doc.optimization) {
    gens = doc.optimization->ga_generations;
    pop = doc.optimization->ga_population;
  }
  ga.generations = gens;
  ga.population = pop;
  const auto gsol = ga_solve(inst, opt.seed, ga);
  s["ga"] = sol_json(gsol);
  s["ga"]["seed"] = opt.seed;
  const auto relaxed = solve_relaxed(inst);
  const auto kkt = kkt_residuals(relaxed, inst);
  s["relaxed"] = {{"lambda", relaxed.lambda},
                  {"demand", relaxed.demand},
                  {"pm", relaxed.pm},
                  {"du", relaxed.du},
                  {"cost", relaxed.cost},
                  {"on_breakpoint", relaxed.on_breakpoint},
                  {"kkt_residual", kkt.max()}};
  s["epsilon"] = epsilon_bound(inst);

  std::vector<std::vector<int>> targets;
  if (doc.optimization && doc.optimization->sigma) {
    targets.push_back(*doc.optimization->sigma);
  } else if (c.mode == ControlMode::Optimal && r.design.passed()) {
    for (const auto& eq : equilibria_adapted(m, c.loads, m.aggregate_load(), c.mode)) {
      targets.push_back(eq.sigma);
    }
  }
  bool certs_ok = true;
  Json certs = Json::array();
  for (const auto& sigma : targets) {
    const auto cert = verify_equilibrium_optimality(sigma, inst);
    certs_ok = certs_ok && cert.passed;
    certs.push_back({{"sigma", sigma},
                     {"cost", cert.cost},
                     {"optimum", cert.optimum},
                     {"gap", cert.gap},
                     {"epsilon", cert.epsilon},
                     {"passed", cert.passed},
                     {"q_hat", cert.q_hat},
                     {"relaxation_gap", cert.relaxation_gap},
                     {"predicted_relaxation_gap", cert.predicted_gap}});
  }
  s["certificates"] = certs;
  detail::verdicts_json({{"kkt", kkt.max() < 1e-9},
                         {"ga_not_below_optimum", gsol.cost >= brute.cost},
                         {"epsilon_optimal", certs_ok},
                         {"bound_applicable", inst.droop_matches_cost() || targets.empty()}},
                        s);
  detail::write_file(opt.out / "optimize.json", s.dump(2) + "\n", res.files);
  return res;
}

inline CommandResult run_consensus(const ScenarioDocument& doc, const RunOptions& opt) {
  const ResolvedScenario r = resolve(doc);
  if (!doc.communication) {
    throw detail::validation("scenario", "consensus needs a 'communication' section");
  }
  const auto& g = *r.controllers.communication;
  const auto loads = r.final_model.loads();
  const auto& cs = *doc.communication;
  const double T = cs.horizon.value_or(doc.simulation.horizon);
  const auto series =
      simulate_consensus(g, loads, ConsensusState::zero(g), T, cs.dt, cs.output_period);
  const auto star = consensus_steady_state(loads);
  const auto psi_star = consensus_psi_reference(g, loads);

  CommandResult res;
  Json& s = res.summary;
  s["command"] = "consensus";
  s["scenario"] = doc.name;
  s["pc_star"] = detail::vec_json(star);
  s["psi_reference"] = detail::vec_json(psi_star);
  std::vector<double> vc;
  for (const auto& p : series) vc.push_back(lyapunov_vc(g, p.state, star, psi_star));
  double max_increase = 0.0;
  for (std::size_t i = 1; i < vc.size(); ++i) {
    max_increase = std::max(max_increase, vc[i] - vc[i - 1]);
  }
  const double tol = 1e-12 * std::max(vc.front(), 1e-300);
  const double err = (series.back().state.pc - star).cwiseAbs().maxCoeff();
  s["final"] = {{"t", series.back().t},
                {"pc", detail::vec_json(series.back().state.pc)},
                {"psi", detail::vec_json(series.back().state.psi)},
                {"max_error", err},
                {"vc", vc.back()}};
  s["vc_max_increase"] = max_increase;
  std::vector<std::pair<std::string, bool>> v = {{"converged", err < 1e-6},
                                                 {"vc_nonincreasing", max_increase <= tol}};
  if (r.controllers.mode == ControlMode::Adapted || r.controllers.mode == ControlMode::Optimal) {
    const auto a1 = check_assumption1(r.final_model.aggregate_load(), r.controllers.loads);
    s["assumption1"] = {{"passed", a1.passed}, {"ell", a1.ell}, {"excluded", a1.excluded},
                        {"distance", a1.distance}};
    if (r.controllers.mode == ControlMode::Optimal) v.push_back({"assumption1", a1.passed});
  }
  detail::verdicts_json(v, s);

  const auto n = g.bus_count(), mlinks = g.link_count();
  if (opt.format == OutputFormat::Csv) {
    std::string csv = "t";
    for (std::size_t j = 0; j < n; ++j) csv += ",pc_" + std::to_string(j + 1);
    for (std::size_t k = 0; k < mlinks; ++k) csv += ",psi_" + std::to_string(k + 1);
    csv += ",V_c\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
      csv += detail::num(series[i].t);
      for (Eigen::Index j = 0; j < series[i].state.pc.size(); ++j) csv += "," + detail::num(series[i].state.pc[j]);
      for (Eigen::Index k = 0; k < series[i].state.psi.size(); ++k) csv += "," + detail::num(series[i].state.psi[k]);
      csv += "," + detail::num(vc[i]) + "\n";
    }
    detail::write_file(opt.out / "consensus.csv", csv, res.files);
  } else {
    Json rows = Json::array();
    for (std::size_t i = 0; i < series.size(); ++i) {
      rows.push_back({{"t", series[i].t},
                      {"pc", detail::vec_json(series[i].state.pc)},
                      {"psi", detail::vec_json(series[i].state.psi)},
                      {"V_c", vc[i]}});
    }
    detail::write_file(opt.out / "consensus.json", rows.dump(1) + "\n", res.files);
  }
  detail::write_file(opt.out / "consensus_summary.json", s.dump(2) + "\n", res.files);
  return res;
}

inline CommandResult run_validate(const ScenarioDocument& doc, const RunOptions& opt) {
  const ResolvedScenario r = resolve(doc);
  CommandResult res;
  Json& s = res.summary;
  s["command"] = "validate";
  s["scenario"] = doc.name;
  s["schema"] = "valid";
  std::vector<std::pair<std::string, bool>> v = {{"schema", true}};
  if (r.controllers.mode != ControlMode::Static) {
    s["design"] = detail::design_json(r.design);
    v.push_back({"design_conditions", r.design.passed()});
    if (r.controllers.communication && r.controllers.mode == ControlMode::Optimal) {
      const auto a1 = check_assumption1(r.final_model.aggregate_load(), r.controllers.loads);
      s["assumption1"] = {{"passed", a1.passed}, {"distance", a1.distance}};
      v.push_back({"assumption1", a1.passed});
    }
  }
  detail::verdicts_json(v, s);
  detail::write_file(opt.out / "validation.json", s.dump(2) + "\n", res.files);
  return res;
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"simulate", "equilibrium", "design",
                                                 "optimize", "consensus",   "validate"};
  return names;
}

inline CommandResult run_command(const std::string& command, const ScenarioDocument& doc,
                                 const RunOptions& opt) {
  if (command == "simulate") return run_simulate(doc, opt);
  if (command == "equilibrium") return run_equilibrium(doc, opt);
  if (command == "design") return run_design(doc, opt);
  if (command == "optimize") return run_optimize(doc, opt);
  if (command == "consensus") return run_consensus(doc, opt);
  if (command == "validate") return run_validate(doc, opt);
  throw Error(ErrorKind::InvalidParameter, "unknown command '" + command + "'");
}

}  // namespace hyload

// Command-line front end: hyload <command> --scenario FILE [--out DIR] [--seed N] [--format csv|json]
//
// Exit status: 0 all verdicts pass, 1 a verdict failed, 2 malformed or invalid
// scenario, 3 any other error.

#include <hyload/commands.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

int main(int argc, char** argv) {
  CLI::App app{"Frequency control with hysteretic loads"};
  app.require_subcommand(1, 1);

  std::string scenario;
  std::string out = "out";
  std::uint64_t seed = 1;
  hyload::OutputFormat format = hyload::OutputFormat::Csv;
  const std::map<std::string, hyload::OutputFormat> formats = {
      {"csv", hyload::OutputFormat::Csv}, {"json", hyload::OutputFormat::Json}};

  const std::map<std::string, std::string> help = {
      {"simulate", "integrate the closed loop and write the trajectory and summary"},
      {"equilibrium", "compute the equilibria the controllers admit"},
      {"design", "synthesise and check switching thresholds"},
      {"optimize", "solve the on-off load-control problem and certify equilibria"},
      {"consensus", "run the communication-layer consensus"},
      {"validate", "check the scenario schema and design conditions"}};
  for (const auto& name : hyload::command_names()) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--scenario", scenario, "scenario JSON file")->required();
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "seed for randomised solvers")->capture_default_str();
    sub->add_option("--format", format, "trajectory format")
        ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case))
        ->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    std::ifstream f(scenario, std::ios::binary);
    if (!f) throw hyload::Error(hyload::ErrorKind::ParseError, "cannot open " + scenario);
    std::stringstream ss;
    ss << f.rdbuf();
    const auto doc = hyload::parse_scenario(ss.str());
    const auto res = hyload::run_command(command, doc, {out, seed, format});
    for (const auto& p : res.files) std::cout << "wrote " << p.string() << "\n";
    for (const auto& [k, v] : res.summary.at("verdicts").items()) {
      std::cout << (v.get<bool>() ? "pass  " : "FAIL  ") << k << "\n";
    }
    return res.passed() ? 0 : 1;
  } catch (const hyload::Error& e) {
    std::cerr << e.what() << "\n";
    const bool input = e.kind() == hyload::ErrorKind::ParseError ||
                       e.kind() == hyload::ErrorKind::ValidationError;
    return input ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

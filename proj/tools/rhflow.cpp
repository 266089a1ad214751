#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rhflow/commands.hpp"

int main(int argc, char** argv) {
  using namespace rhflow::cli;
  CLI::App app{"rhflow: numerical lab for the Ricci-Harmonic flow on warped products"};
  app.set_version_flag("--version", std::string(RHFLOW_VERSION));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::size_t stop_after = 0;
  auto* run = app.add_subcommand("run", "integrate a config and write results");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("-o,--out", out_dir, "output directory")->required();
  run->add_option("--stop-after", stop_after,
                  "stop after this many steps and leave a checkpoint");

  std::string checkpoint;
  auto* resume = app.add_subcommand("resume", "continue an interrupted run");
  resume->add_option("checkpoint", checkpoint, "checkpoint.txt of the run")->required();

  std::string scenarios = "all", verify_out, fault;
  bool serial = false;
  auto* verify = app.add_subcommand("verify", "run the scenario suite and check every estimate");
  verify->add_option("-s,--scenarios", scenarios,
                     "comma-separated scenario names, 'all', or '' for none");
  verify->add_option("-o,--out", verify_out, "directory for per-scenario output and summary.json");
  verify->add_option("--inject-fault", fault, "test fixture: 'alpha-sign' flips the alpha term")
      ->check(CLI::IsMember({"alpha-sign"}));
  verify->add_flag("--serial", serial, "run scenarios one at a time");

  std::string scenario = "shrinking_cylinder", json_path;
  ConvergeOptions conv;
  auto* converge = app.add_subcommand("converge", "fit temporal and spatial convergence orders");
  converge->add_option("scenario", scenario, "scenario name");
  converge->add_option("-m,--m", conv.m, "base grid size");
  converge->add_option("--dt", conv.dt, "base time step of the temporal study");
  converge->add_option("--t-end", conv.t_end, "end time");
  converge->add_option("--json", json_path, "write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadInput;
  }

  if (*run) return cmd_run(config_path, out_dir, std::cout, std::cerr, stop_after);
  if (*resume) return cmd_resume(checkpoint, std::cout, std::cerr);
  if (*verify) {
    VerifyOptions opt;
    try {
      opt.scenarios = parse_scenario_list(scenarios);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitBadInput;
    }
    opt.out_dir = verify_out;
    opt.flip_alpha_sign = fault == "alpha-sign";
    opt.concurrent = !serial;
    return cmd_verify(opt, std::cout, std::cerr);
  }
  if (*converge) {
    try {
      conv.scenario = rhflow::scenario_from_string(scenario);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitBadInput;
    }
    return cmd_converge(conv, json_path, std::cout, std::cerr);
  }
  return kExitBadInput;
}

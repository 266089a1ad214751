#pragma once

// Subcommands behind tools/rhflow. Each returns a process exit status:
//   0  success (run reached t_end or the blow-up threshold; all checks pass)
//   1  run ended non-finite, or a verification check failed
//   2  bad input (config, checkpoint, options)
//   3  output could not be written

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "rhflow/config.hpp"
#include "rhflow/oracles.hpp"

namespace rhflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitIo = 3;

/// Run a config into `out_dir`. With stop_after > 0 the run stops after that
/// many accepted steps, leaves a resumable checkpoint.txt and writes no
/// manifest.
int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::ostream& out, std::ostream& err, std::size_t stop_after = 0);

int cmd_resume(const std::string& checkpoint_path, std::ostream& out,
               std::ostream& err);

struct CheckResult {
  std::string scenario;
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
  bool upper = true;  // pass iff value <= tolerance (else value >= tolerance)
  bool pass = false;
  std::string note;  // set when the scenario itself failed to run
};

struct VerifyOptions {
  std::vector<ScenarioId> scenarios;
  std::string out_dir;  // empty: no files written
  bool flip_alpha_sign = false;
  bool concurrent = true;
};

std::vector<CheckResult> verify_scenario(ScenarioId id, bool flip_alpha_sign,
                                         const std::string& out_dir);
std::vector<CheckResult> verify_suite(const VerifyOptions& options);
int cmd_verify(const VerifyOptions& options, std::ostream& out,
               std::ostream& err);

struct ConvergeOptions {
  ScenarioId scenario = ScenarioId::shrinking_cylinder;
  std::size_t m = 0;    // 0: scenario default
  double dt = 0.0;      // 0: 0.01; halved until below the stability limit
  double t_end = 0.0;   // 0: scenario default
};

struct OrderStudy {
  std::string name;
  std::vector<double> params;  // dt or h per level
  std::vector<double> errors;
  std::vector<double> orders;  // log2 of successive error ratios
  bool applicable = true;
  bool exact = false;  // every error at rounding level
  double min_order() const;
};

struct ConvergeReport {
  ScenarioId scenario = ScenarioId::shrinking_cylinder;
  OrderStudy temporal;
  OrderStudy spatial;
  OrderStudy s_residual;
  double literal_coupling_residual = 0.0;  // S built with coupling alpha
};

ConvergeReport converge_study(const ConvergeOptions& options);
int cmd_converge(const ConvergeOptions& options, const std::string& json_path,
                 std::ostream& out, std::ostream& err);

/// Parse "a,b,c" into scenario ids; an empty string gives an empty list.
std::vector<ScenarioId> parse_scenario_list(const std::string& text);

}  // namespace rhflow::cli

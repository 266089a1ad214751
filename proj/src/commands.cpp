#include "rhflow/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "rhflow/analysis.hpp"
#include "rhflow/flow.hpp"
#include "rhflow/io.hpp"
#include "rhflow/oracles.hpp"

namespace rhflow::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// --- run / resume -----------------------------------------------------------

std::string snapshot_name(std::size_t step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "snapshots/snap_%08zu.txt", step);
  return buf;
}

ordered_json config_echo(const std::string& text) {
  ordered_json j = ordered_json::object();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

struct Session {
  fs::path dir;
  RunConfig config;
  std::string config_text;
  std::ofstream ts;
  std::uint64_t bytes = 0;
  std::size_t records = 0;
  std::vector<std::string> snapshots;

  void write_record(const MonitorRecord& r) {
    const std::string line = io::record_to_json(r, config.monitors).dump() + "\n";
    ts << line;
    if (!ts) throw std::runtime_error("cannot write timeseries.jsonl");
    bytes += line.size();
    ++records;
  }

  void add_snapshot(const std::string& name) {
    if (std::find(snapshots.begin(), snapshots.end(), name) == snapshots.end()) {
      snapshots.push_back(name);
    }
  }

  void snapshot(const WarpedState& state, std::size_t step) {
    const std::string name = snapshot_name(step);
    io::save_snapshot((dir / name).string(), state);
    add_snapshot(name);
  }

  void checkpoint(const FlowRunner& runner, bool completed) {
    ts.flush();
    if (!ts) throw std::runtime_error("cannot write timeseries.jsonl");
    io::Checkpoint cp;
    cp.completed = completed;
    cp.output_dir = dir.string();
    cp.records = records;
    cp.timeseries_bytes = bytes;
    cp.steps = runner.steps();
    cp.rejected = runner.rejected();
    cp.snapshots = snapshots;
    if (completed && runner.termination()) cp.termination = to_string(*runner.termination());
    cp.config_text = config_text;
    cp.state = runner.state();
    cp.accumulator = runner.accumulator();
    cp.last_record = runner.last_record();
    io::save_checkpoint((dir / "checkpoint.txt").string(), cp);
  }

  void manifest(const std::string& termination, const MonitorRecord& last,
                std::size_t steps, std::size_t rejected, bool has_checkpoint) {
    ordered_json m;
    m["format"] = "rhflow-manifest 1";
    m["version"] = RHFLOW_VERSION;
    m["config"] = config_echo(config_text);
    m["termination"] = termination;
    ordered_json s;
    s["steps"] = steps;
    s["rejected_steps"] = rejected;
    s["records"] = records;
    s["t_final"] = last.t;
    s["max_rm_final"] = last.max_rm;
    s["max_ric_final"] = last.max_ric;
    s["min_S_final"] = last.min_S;
    s["volume_final"] = last.volume;
    s["length_final"] = last.length;
    s["norm_R_raw"] = last.norm_R_raw;
    s["norm_W_raw"] = last.norm_W_raw;
    m["summary"] = s;
    ordered_json files = ordered_json::array();
    files.push_back("timeseries.jsonl");
    for (const auto& name : snapshots) files.push_back(name);
    if (has_checkpoint) files.push_back("checkpoint.txt");
    m["artifacts"] = files;
    io::write_atomic((dir / "manifest.json").string(), m.dump(2) + "\n");
  }
};

int drive(Session& s, FlowRunner& runner, std::ostream& out) {
  runner.on_record = [&s](const TrajectoryEntry& e) { s.write_record(e.record); };
  const std::size_t every = s.config.snapshot_every;
  while (!runner.done()) {
    runner.advance();
    runner.clear_entries();
    if (runner.termination() == Termination::interrupted) break;
    if (!runner.done() && every > 0 && runner.steps() % every == 0) {
      s.snapshot(runner.state(), runner.steps());
      s.checkpoint(runner, false);
    }
  }
  if (runner.termination() == Termination::interrupted) {
    s.checkpoint(runner, false);
    out << "stopped after " << runner.steps() << " steps at t = "
        << runner.state().t << "; resume with: rhflow resume "
        << (s.dir / "checkpoint.txt").string() << "\n";
    return kExitOk;
  }
  s.snapshot(runner.state(), runner.steps());
  s.checkpoint(runner, true);
  const std::string term = to_string(*runner.termination());
  s.manifest(term, runner.last_record(), runner.steps(), runner.rejected(), true);
  out << "termination: " << term << " at t = " << runner.state().t << " after "
      << runner.steps() << " steps\n";
  return runner.termination() == Termination::nonfinite ? kExitFailed : kExitOk;
}

int run_homogeneous_into(Session& s, std::ostream& out) {
  const HomogeneousTrajectory traj =
      run_homogeneous(s.config.flow, initial_homogeneous(s.config.scenario));
  const std::size_t every = s.config.snapshot_every;
  for (const auto& e : traj.entries) {
    s.write_record(e.record);
    if (every > 0 && e.record.step % every == 0) {
      const std::string name = snapshot_name(e.record.step);
      io::save_homogeneous_snapshot((s.dir / name).string(), e.state);
      s.add_snapshot(name);
    }
  }
  const auto& last = traj.entries.back();
  const std::string name = snapshot_name(last.record.step);
  io::save_homogeneous_snapshot((s.dir / name).string(), last.state);
  s.add_snapshot(name);
  s.ts.flush();
  if (!s.ts) throw std::runtime_error("cannot write timeseries.jsonl");
  const std::string term = to_string(traj.termination);
  s.manifest(term, last.record, traj.steps, 0, false);
  out << "termination: " << term << " at t = " << last.state.t << " after "
      << traj.steps << " steps\n";
  return traj.termination == Termination::nonfinite ? kExitFailed : kExitOk;
}

}  // namespace

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::ostream& out, std::ostream& err, std::size_t stop_after) {
  Session s;
  try {
    s.config = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitBadInput;
  }
  s.config_text = to_text(s.config);
  s.dir = out_dir;
  if (stop_after > 0 && s.config.scenario.homogeneous()) {
    err << "error: --stop-after is not supported for homogeneous scenarios\n";
    return kExitBadInput;
  }
  try {
    fs::create_directories(s.dir / "snapshots");
    fs::remove(s.dir / "manifest.json");
    s.ts.open(s.dir / "timeseries.jsonl", std::ios::binary | std::ios::trunc);
    if (!s.ts) throw std::runtime_error("cannot open timeseries.jsonl");
  } catch (const std::exception& e) {
    err << "output error: " << out_dir << ": " << e.what() << "\n";
    return kExitIo;
  }

  try {
    if (s.config.scenario.homogeneous()) return run_homogeneous_into(s, out);
    FlowConfig fc = s.config.flow;
    fc.max_steps = stop_after;
    std::optional<FlowRunner> runner;
    try {
      runner.emplace(fc, initial_warped(s.config.scenario));
    } catch (const std::invalid_argument& e) {
      err << "config error: " << e.what() << "\n";
      return kExitBadInput;
    }
    for (const auto& e : runner->entries()) s.write_record(e.record);
    runner->clear_entries();
    if (s.config.snapshot_every > 0) s.snapshot(runner->state(), 0);
    return drive(s, *runner, out);
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_resume(const std::string& checkpoint_path, std::ostream& out,
               std::ostream& err) {
  io::Checkpoint cp;
  RunConfig config;
  try {
    cp = io::load_checkpoint(checkpoint_path);
    config = parse_config(cp.config_text);
  } catch (const std::exception& e) {
    err << "bad checkpoint: " << checkpoint_path << ": " << e.what() << "\n";
    return kExitBadInput;
  }
  if (cp.completed) {
    out << "run already complete (" << cp.termination << "); nothing to do\n";
    return kExitOk;
  }
  Session s;
  s.config = config;
  s.config_text = cp.config_text;
  s.dir = fs::path(checkpoint_path).parent_path();
  if (s.dir.empty()) s.dir = ".";
  s.bytes = cp.timeseries_bytes;
  s.records = cp.records;
  s.snapshots = cp.snapshots;

  const fs::path ts_path = s.dir / "timeseries.jsonl";
  try {
    std::error_code ec;
    const auto size = fs::file_size(ts_path, ec);
    if (ec || size < cp.timeseries_bytes) {
      err << "bad checkpoint: timeseries.jsonl is missing or shorter than "
             "the checkpoint records\n";
      return kExitBadInput;
    }
    fs::resize_file(ts_path, cp.timeseries_bytes);
    s.ts.open(ts_path, std::ios::binary | std::ios::app);
    if (!s.ts) throw std::runtime_error("cannot open timeseries.jsonl");
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return kExitIo;
  }

  try {
    std::optional<FlowRunner> runner;
    try {
      runner.emplace(FlowRunner::restore(config.flow, cp.state, cp.accumulator,
                                         cp.last_record, cp.steps, cp.rejected));
    } catch (const std::invalid_argument& e) {
      err << "bad checkpoint: " << e.what() << "\n";
      return kExitBadInput;
    }
    return drive(s, *runner, out);
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return kExitIo;
  }
}

// --- verify -----------------------------------------------------------------

namespace {

constexpr double kMonotoneTol = 1e-8;
constexpr double kGradientTol = -1e-8;
constexpr double kDistortionTol = 1e-8;
constexpr double kVolumeRelTol = 1e-3;
constexpr double kLowerBoundTol = -1e-8;
constexpr double kBlowupTimeTol = 0.01;
constexpr double kExactTol = 1e-6;
constexpr double kScalingTol = 1e-12;
constexpr double kPerturbedCylinderThreshold = 1e6;

class Checks {
 public:
  explicit Checks(std::string scenario) : scenario_(std::move(scenario)) {}

  void at_most(const std::string& name, double value, double tol) {
    add(name, value, tol, true);
  }
  void at_least(const std::string& name, double value, double tol) {
    add(name, value, tol, false);
  }
  std::vector<CheckResult> take() { return std::move(out_); }

 private:
  void add(const std::string& name, double value, double tol, bool upper) {
    const bool pass = std::isfinite(value) && (upper ? value <= tol : value >= tol);
    out_.push_back(CheckResult{scenario_, name, value, tol, upper, pass, {}});
  }
  std::string scenario_;
  std::vector<CheckResult> out_;
};

RunConfig verify_config(ScenarioId id) {
  RunConfig c;
  c.scenario = default_scenario(id);
  c.flow.scenario = to_string(id);
  c.flow.t_end = 1.0;
  if (id == ScenarioId::torus_list) c.flow.dt_max = 1e-3;
  if (id == ScenarioId::perturbed_cylinder) c.flow.blowup_threshold = kPerturbedCylinderThreshold;
  return c;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

void write_scenario_files(const std::string& out_dir, const std::string& name,
                          const std::vector<MonitorRecord>& records,
                          const std::vector<CheckResult>& checks) {
  if (out_dir.empty()) return;
  const fs::path dir = fs::path(out_dir) / name;
  fs::create_directories(dir);
  std::string ts;
  const MonitorFlags all;
  for (const auto& r : records) ts += io::record_to_json(r, all).dump() + "\n";
  io::write_atomic((dir / "timeseries.jsonl").string(), ts);
  ordered_json j = ordered_json::array();
  for (const auto& c : checks) {
    j.push_back({{"check", c.check}, {"value", c.value}, {"tolerance", c.tolerance},
                 {"relation", c.upper ? "<=" : ">="}, {"pass", c.pass}});
  }
  io::write_atomic((dir / "checks.json").string(), j.dump(2) + "\n");
}

void common_record_checks(Checks& ck, std::span<const MonitorRecord> recs,
                          double alpha, double eps0) {
  ck.at_most("min_S_monotone", check_min_S_monotone(recs).worst_scaled, kMonotoneTol);
  if (alpha > 0.0) {
    ck.at_least("gradient_bound", check_gradient_bound(recs, alpha, eps0), kGradientTol);
  }
  const MaxPrincipleCheck mp = check_phi_max_principle(recs);
  if (mp.applicable) {
    ck.at_most("phi_max_principle", mp.violation, 1e-8 * mp.oscillation);
  }
}

std::vector<CheckResult> verify_homogeneous(const Scenario& sc, bool flip,
                                            const std::string& out_dir) {
  Checks ck(to_string(sc.id));
  RunConfig rc = verify_config(sc.id);
  rc.flow.flip_alpha_sign = flip;
  const HomogeneousTrajectory traj =
      run_homogeneous(rc.flow, initial_homogeneous(sc));
  const auto recs = traj.records();
  common_record_checks(ck, recs, sc.alpha, rc.flow.epsilon0);

  double exact = 0.0;
  for (const auto& e : traj.entries) {
    if (e.state.t > 0.2) break;
    const auto want = std::get<HomogeneousState>(exact_state(sc, e.state.t));
    for (std::size_t j = 0; j < want.factors.size(); ++j) {
      exact = std::max(exact, rel_err(e.state.factors[j].coefficient,
                                      want.factors[j].coefficient));
    }
  }
  ck.at_most("exact_solution_error", exact, kExactTol);
  if (auto ts = singular_time(sc)) {
    const double tb = traj.final_state().t;
    ck.at_most("blowup_time_error",
               traj.termination == Termination::blowup_threshold
                   ? rel_err(tb, *ts)
                   : std::numeric_limits<double>::infinity(),
               kBlowupTimeTol);
  }

  // Single-coefficient metric distortion and volume identity, in closed form.
  const HomogeneousState& s0 = traj.entries.front().state;
  double excess = 0.0, vol_rel = 0.0, lower = std::numeric_limits<double>::infinity();
  double c_meas = 0.0;
  for (std::size_t k = 0; k < traj.entries.size(); ++k) {
    const auto& e = traj.entries[k];
    c_meas = std::max(c_meas, e.record.c_meas);
    const double span = e.state.t - s0.t;
    for (std::size_t j = 0; j < s0.factors.size(); ++j) {
      const double l = std::abs(std::log(e.state.factors[j].coefficient /
                                         s0.factors[j].coefficient));
      excess = std::max(excess, l - c_meas * span);
    }
    const double V0 = traj.entries.front().record.volume;
    lower = std::min(lower,
                     (e.record.volume - std::exp(-e.record.c_vol * span) * V0) / V0);
    if (k > 0) {
      const auto& p = traj.entries[k - 1];
      const double dv = e.record.volume - p.record.volume;
      const double mid = 0.5 * (e.record.dvdt_integrand + p.record.dvdt_integrand) *
                         (e.state.t - p.state.t);
      const double denom = std::max({std::abs(dv), std::abs(mid), 1e-13 * e.record.volume});
      vol_rel = std::max(vol_rel, std::abs(dv - mid) / denom);
    }
  }
  ck.at_most("metric_distortion", excess, kDistortionTol);
  ck.at_most("volume_derivative_rel", vol_rel, kVolumeRelTol);
  ck.at_least("volume_lower_bound", lower, kLowerBoundTol);
  const auto ratio = curvature_ratio_diagnostic(recs);
  ck.at_most("curvature_ratio_spread", ratio_spread(ratio), 2.0);

  HomogeneousState unit;
  unit.factors = {ProductFactor{1.0, FactorKind::round_sphere, 3, 0.0}};
  std::vector<double> radii;
  for (int i = 0; i <= 15; ++i) radii.push_back(0.05 + 0.01 * i);
  const ExpansionFit fit = ball_volume_expansion_fit(unit, radii);
  ck.at_most("ball_volume_fit_S3", rel_err(fit.c, 0.2), 0.02);

  auto checks = ck.take();
  write_scenario_files(out_dir, to_string(sc.id), recs, checks);
  return checks;
}

}  // namespace

std::vector<CheckResult> verify_scenario(ScenarioId id, bool flip,
                                         const std::string& out_dir) {
  const Scenario sc = default_scenario(id);
  if (sc.homogeneous()) return verify_homogeneous(sc, flip, out_dir);

  Checks ck(to_string(id));
  RunConfig rc = verify_config(id);
  rc.flow.flip_alpha_sign = flip;
  const Trajectory traj = run(rc.flow, initial_warped(sc));
  const auto recs = traj.records();
  const double eps0 = rc.flow.epsilon0;
  ck.at_most("nonfinite", traj.termination == Termination::nonfinite ? 1.0 : 0.0, 0.0);
  common_record_checks(ck, recs, sc.alpha, eps0);
  ck.at_most("metric_distortion", check_metric_distortion(traj).worst(), kDistortionTol);
  const VolumeCheck vol = check_volume_evolution(traj);
  ck.at_most("volume_derivative_rel", vol.relative_residual, kVolumeRelTol);
  ck.at_least("volume_lower_bound", vol.lower_bound_margin, kLowerBoundTol);

  const WarpedState& last = traj.final_state();
  const double q = std::sqrt(max_of(compute_curvature(last).rm_sq));
  if (q > 0.0) {
    ck.at_most("rescale_scaling", parabolic_rescale(last, q).scaling_error, kScalingTol);
  }

  switch (id) {
    case ScenarioId::flat_stationary: {
      const WarpedState& s0 = traj.entries.front().state;
      double drift = 0.0;
      for (std::size_t i = 0; i < s0.size(); ++i) {
        drift = std::max({drift, std::abs(last.f[i] - s0.f[i]),
                          std::abs(last.psi[i] - s0.psi[i]),
                          std::abs(last.phi_per[i] - s0.phi_per[i])});
      }
      ck.at_most("stationary_drift", drift, 1e-12);
      const SpacetimeNorms nrm = spacetime_norms(traj);
      ck.at_most("spacetime_norms", std::max(nrm.R_raw, nrm.W_raw), 0.0);
      ck.at_most("S_evolution_residual",
                 monitor_S_evolution(traj, traj.entries.size() / 2,
                                     identity_coupling(sc.alpha)),
                 1e-12);
      break;
    }
    case ScenarioId::torus_list: {
      const auto want = std::get<WarpedState>(exact_state(sc, last.t));
      double err = 0.0;
      for (std::size_t i = 0; i < last.size(); ++i) {
        err = std::max(err, rel_err(last.f[i] * last.f[i], want.f[0] * want.f[0]));
      }
      ck.at_most("exact_solution_error", err, kExactTol);
      ck.at_most("S_evolution_residual",
                 monitor_S_evolution(traj, traj.entries.size() / 2,
                                     identity_coupling(sc.alpha)),
                 kExactTol);
      break;
    }
    case ScenarioId::shrinking_cylinder: {
      double err = 0.0;
      const MonitorRecord* at02 = nullptr;
      for (const auto& e : traj.entries) {
        if (e.state.t > 0.2 + 1e-12) break;
        at02 = &e.record;
        const double want = sc.psi0 * sc.psi0 - 2.0 * (sc.n - 2) * e.state.t;
        for (double p : e.state.psi) err = std::max(err, rel_err(p * p, want));
      }
      ck.at_most("exact_solution_error", err, kExactTol);
      const double ts = singular_time(sc).value();
      ck.at_most("blowup_time_error",
                 traj.termination == Termination::blowup_threshold
                     ? rel_err(last.t, ts)
                     : std::numeric_limits<double>::infinity(),
                 kBlowupTimeTol);
      const auto ratio = curvature_ratio_diagnostic(recs);
      ck.at_most("curvature_ratio_spread", ratio_spread(ratio), 2.0);
      if (at02 != nullptr && sc.n == 4) {
        const double L = kTwoPi * std::sqrt(sc.a0);
        const double p2 = sc.psi0 * sc.psi0;
        const double T = at02->t;
        const double want = 216.0 * unit_sphere_volume(3) * L * 0.5 *
                            (1.0 / std::sqrt(p2 - 4.0 * T) - 1.0 / sc.psi0);
        ck.at_most("norm_R_closed_form", rel_err(at02->norm_R_raw, want), 0.01);
      }
      const auto pts = pick_blowup_points(traj, 2.0);
      double worst = pts.empty() ? std::numeric_limits<double>::infinity() : 0.0;
      for (std::size_t k = 0; k < pts.size(); ++k) {
        worst = std::max(worst, pts[k].running_max / 2.0 - pts[k].Q);
        if (k > 0) worst = std::max(worst, pts[k - 1].Q - pts[k].Q);
      }
      ck.at_most("blowup_points_valid", worst, 0.0);
      break;
    }
    case ScenarioId::perturbed_cylinder: {
      const auto ratio = curvature_ratio_diagnostic(recs);
      ck.at_most("curvature_ratio_spread", ratio_spread(ratio), 4.0);
      ck.at_most("blowup_reached",
                 traj.termination == Termination::blowup_threshold ? 0.0 : 1.0, 0.0);
      const auto pts = pick_blowup_points(traj, 2.0);
      double off = pts.empty() ? std::numeric_limits<double>::infinity() : 0.0;
      if (!pts.empty()) {
        const auto& st = traj.entries[pts.back().entry].state;
        const auto neck = static_cast<std::size_t>(
            std::min_element(st.psi.begin(), st.psi.end()) - st.psi.begin());
        off = static_cast<double>(neck == pts.back().grid_index ? 0 : 1);
      }
      ck.at_most("blowup_point_at_neck", off, 0.0);
      ConvergeOptions co;
      co.scenario = id;
      ck.at_least("S_evolution_order", converge_study(co).s_residual.min_order(), 1.9);
      break;
    }
    case ScenarioId::perturbed_torus:
    case ScenarioId::shrinking_sphere:
      break;
  }
  auto checks = ck.take();
  write_scenario_files(out_dir, to_string(id), recs, checks);
  return checks;
}

std::vector<CheckResult> verify_scenario_guarded(ScenarioId id, bool flip,
                                                 const std::string& out_dir) {
  try {
    return verify_scenario(id, flip, out_dir);
  } catch (const std::exception& e) {
    return {CheckResult{to_string(id), "scenario_error",
                        std::numeric_limits<double>::quiet_NaN(), 0.0, true, false,
                        e.what()}};
  }
}

std::vector<CheckResult> verify_suite(const VerifyOptions& opt) {
  std::vector<std::vector<CheckResult>> parts(opt.scenarios.size());
  if (opt.concurrent) {
    std::vector<std::future<std::vector<CheckResult>>> jobs;
    for (ScenarioId id : opt.scenarios) {
      jobs.push_back(std::async(std::launch::async, verify_scenario_guarded, id,
                                opt.flip_alpha_sign, opt.out_dir));
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) parts[k] = jobs[k].get();
  } else {
    for (std::size_t k = 0; k < opt.scenarios.size(); ++k) {
      parts[k] = verify_scenario_guarded(opt.scenarios[k], opt.flip_alpha_sign, opt.out_dir);
    }
  }
  std::vector<CheckResult> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  std::vector<CheckResult> checks;
  try {
    checks = verify_suite(opt);
  } catch (const std::exception& e) {
    err << "verify error: " << e.what() << "\n";
    return kExitFailed;
  }
  std::size_t passed = 0;
  out << std::left << std::setw(20) << "scenario" << std::setw(28) << "check"
      << std::setw(14) << "value" << std::setw(16) << "tolerance" << "result\n";
  for (const auto& c : checks) {
    std::ostringstream tol;
    tol << (c.upper ? "<= " : ">= ") << std::setprecision(3) << c.tolerance;
    out << std::left << std::setw(20) << c.scenario << std::setw(28) << c.check
        << std::setw(14) << std::setprecision(4) << c.value << std::setw(16)
        << tol.str() << (c.pass ? "PASS" : "FAIL");
    if (!c.note.empty()) out << "  (" << c.note << ")";
    out << "\n";
    if (c.pass) ++passed;
  }
  out << passed << "/" << checks.size() << " checks passed\n";
  if (!opt.out_dir.empty()) {
    try {
      fs::create_directories(opt.out_dir);
      ordered_json j;
      j["version"] = RHFLOW_VERSION;
      j["flip_alpha_sign"] = opt.flip_alpha_sign;
      ordered_json scen = ordered_json::array();
      for (ScenarioId id : opt.scenarios) scen.push_back(to_string(id));
      j["scenarios"] = scen;
      ordered_json arr = ordered_json::array();
      for (const auto& c : checks) {
        arr.push_back({{"scenario", c.scenario}, {"check", c.check},
                       {"value", std::isfinite(c.value) ? ordered_json(c.value)
                                                        : ordered_json(nullptr)},
                       {"tolerance", c.tolerance},
                       {"relation", c.upper ? "<=" : ">="}, {"pass", c.pass}});
        if (!c.note.empty()) arr.back()["note"] = c.note;
      }
      j["checks"] = arr;
      j["all_pass"] = passed == checks.size();
      io::write_atomic((fs::path(opt.out_dir) / "summary.json").string(),
                       j.dump(2) + "\n");
    } catch (const std::exception& e) {
      err << "output error: " << e.what() << "\n";
      return kExitIo;
    }
  }
  return passed == checks.size() ? kExitOk : kExitFailed;
}

// --- converge ---------------------------------------------------------------

double OrderStudy::min_order() const {
  if (!applicable) return std::numeric_limits<double>::quiet_NaN();
  if (exact) return std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (double o : orders) lo = std::min(lo, o);
  return orders.empty() ? std::numeric_limits<double>::quiet_NaN() : lo;
}

namespace {

constexpr double kRoundoff = 1e-13;
// A level pair only yields an order when the finer error clears this floor;
// below it the ratio measures rounding noise.
constexpr double kOrderFloor = 1e-12;

void finish_orders(OrderStudy& st, double scale) {
  st.exact = std::all_of(st.errors.begin(), st.errors.end(),
                         [&](double e) { return e <= kRoundoff * scale; });
  st.orders.clear();
  if (st.exact) return;
  for (std::size_t k = 0; k + 1 < st.errors.size(); ++k) {
    if (st.errors[k + 1] <= kOrderFloor * scale) break;
    st.orders.push_back(std::log(st.errors[k] / st.errors[k + 1]) /
                        std::log(st.params[k] / st.params[k + 1]));
  }
}

// Max difference over f, psi and u between a grid and a 2^k finer one sampled
// at the coarse points.
double grid_difference(const WarpedState& coarse, const WarpedState& fine) {
  const std::size_t stride = fine.size() / coarse.size();
  double d = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const std::size_t j = i * stride;
    d = std::max({d, std::abs(coarse.f[i] - fine.f[j]),
                  std::abs(coarse.psi[i] - fine.psi[j]),
                  std::abs(coarse.phi_per[i] - fine.phi_per[j])});
  }
  return d;
}

double state_scale(const WarpedState& s) {
  double v = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    v = std::max({v, std::abs(s.f[i]), std::abs(s.psi[i]), std::abs(s.phi_per[i])});
  }
  return v;
}

double default_t_end(const Scenario& s) {
  switch (s.id) {
    case ScenarioId::shrinking_cylinder:
    case ScenarioId::shrinking_sphere: return 0.2;
    case ScenarioId::perturbed_cylinder:
    case ScenarioId::perturbed_torus: return 0.05;
    case ScenarioId::flat_stationary: return 0.1;
    default: return 1.0;
  }
}

FlowConfig study_flow(const Scenario& sc, double t_end) {
  FlowConfig fc;
  fc.scenario = to_string(sc.id);
  fc.t_end = t_end;
  fc.blowup_threshold = 1e12;
  return fc;
}

WarpedState evolve(WarpedState s, double t_target, double dt_cap) {
  const double span = t_target - s.t;
  if (span <= 0.0) return s;
  const auto nsub = static_cast<std::size_t>(std::ceil(span / dt_cap));
  const double dt = span / static_cast<double>(nsub);
  const double t0 = s.t;
  for (std::size_t k = 0; k < nsub; ++k) {
    auto next = step(s, dt);
    if (!next) throw std::runtime_error("converge: step failed");
    s = std::move(*next);
  }
  s.t = t0 + span;
  return s;
}

double initial_stable_dt(const WarpedState& s, double c_cfl) {
  FlowConfig fc;
  fc.c_cfl = c_cfl;
  return stable_dt(s, compute_curvature(s), fc);
}

OrderStudy temporal_study(const Scenario& sc, double dt0, double t_end) {
  OrderStudy st;
  st.name = "temporal";
  FlowConfig fc = study_flow(sc, t_end);
  fc.c_cfl = 1.0;
  if (sc.homogeneous()) {
    const HomogeneousState h0 = initial_homogeneous(sc);
    const auto want = std::get<HomogeneousState>(exact_state(sc, t_end));
    for (int k = 0; k < 3; ++k) {
      fc.dt_max = dt0 / std::pow(2.0, k);
      const auto traj = run_homogeneous(fc, h0);
      double e = 0.0;
      for (std::size_t j = 0; j < want.factors.size(); ++j) {
        e = std::max(e, std::abs(traj.final_state().factors[j].coefficient -
                                 want.factors[j].coefficient));
      }
      st.params.push_back(fc.dt_max);
      st.errors.push_back(e);
    }
    finish_orders(st, want.factors.front().coefficient);
    return st;
  }
  const WarpedState s0 = initial_warped(sc);
  bool have_exact = true;
  WarpedState exact;
  try {
    exact = std::get<WarpedState>(exact_state(sc, t_end));
  } catch (const std::domain_error&) {
    have_exact = false;
  }
  // Keep every level below the explicit stability limit so dt_max binds.
  const double limit = initial_stable_dt(s0, fc.c_cfl);
  while (dt0 > 0.5 * limit) dt0 *= 0.5;
  const int levels = have_exact ? 3 : 4;
  std::vector<WarpedState> finals;
  for (int k = 0; k < levels; ++k) {
    fc.dt_max = dt0 / std::pow(2.0, k);
    finals.push_back(run(fc, s0).final_state());
  }
  for (int k = 0; k < 3; ++k) {
    st.params.push_back(dt0 / std::pow(2.0, k));
    st.errors.push_back(have_exact ? grid_difference(finals[k], exact)
                                   : grid_difference(finals[k], finals[k + 1]));
  }
  finish_orders(st, state_scale(s0));
  return st;
}

OrderStudy spatial_study(const Scenario& sc, double t_end) {
  OrderStudy st;
  st.name = "spatial";
  if (sc.homogeneous()) {
    st.applicable = false;
    return st;
  }
  std::vector<WarpedState> initial;
  for (int k = 0; k < 4; ++k) {
    Scenario s = sc;
    s.m = sc.m << k;
    initial.push_back(initial_warped(s));
  }
  FlowConfig fc = study_flow(sc, t_end);
  fc.dt_max = 0.5 * initial_stable_dt(initial.back(), fc.c_cfl);
  std::vector<WarpedState> finals;
  for (const auto& s0 : initial) finals.push_back(run(fc, s0).final_state());
  for (int k = 0; k < 3; ++k) {
    st.params.push_back(kTwoPi / static_cast<double>(initial[k].size()));
    st.errors.push_back(grid_difference(finals[k], finals[k + 1]));
  }
  finish_orders(st, state_scale(initial.front()));
  return st;
}

// Residual of the S-evolution identity at t = delta using snapshots at
// 0, delta, 2 delta, with delta proportional to h.
OrderStudy s_residual_study(const Scenario& sc, double* literal) {
  OrderStudy st;
  st.name = "S_residual";
  if (sc.homogeneous()) {
    st.applicable = false;
    return st;
  }
  const double delta0 = 0.01;
  double scale = 0.0;
  for (int k = 0; k < 3; ++k) {
    Scenario s = sc;
    s.m = sc.m << k;
    const WarpedState s0 = initial_warped(s);
    const double delta = delta0 / std::pow(2.0, k);
    const double cap = std::min(delta / 8.0, 0.5 * initial_stable_dt(s0, 0.1));
    const WarpedState s1 = evolve(s0, delta, cap);
    const WarpedState s2 = evolve(s1, 2.0 * delta, cap);
    st.params.push_back(kTwoPi / static_cast<double>(s.m));
    st.errors.push_back(monitor_S_evolution(s0, s1, s2, identity_coupling(s.alpha)));
    if (k == 2 && literal) *literal = monitor_S_evolution(s0, s1, s2, s.alpha);
    const CurvatureFields c = compute_curvature(s1, identity_coupling(s.alpha));
    for (double v : c.s_tensor_sq) scale = std::max(scale, v);
  }
  finish_orders(st, std::max(1.0, scale));
  return st;
}

ordered_json study_json(const OrderStudy& st) {
  ordered_json j;
  j["applicable"] = st.applicable;
  j["params"] = st.params;
  j["errors"] = st.errors;
  j["orders"] = st.orders;
  if (!st.applicable) j["result"] = "n/a";
  else if (st.exact) j["result"] = "exact";
  else if (st.orders.empty()) j["result"] = "unresolved";
  else j["result"] = st.min_order();
  return j;
}

void print_study(std::ostream& out, const OrderStudy& st, const char* param) {
  out << st.name << ":";
  if (!st.applicable) {
    out << " n/a\n";
    return;
  }
  out << "\n";
  for (std::size_t k = 0; k < st.errors.size(); ++k) {
    out << "  " << param << " = " << std::setw(12) << std::setprecision(6)
        << st.params[k] << "  error = " << std::setw(12) << std::setprecision(4)
        << st.errors[k];
    if (st.exact) {
      out << "\n";
    } else if (k > 0 && k <= st.orders.size()) {
      out << "  order = " << std::setprecision(3) << st.orders[k - 1] << "\n";
    } else {
      out << "\n";
    }
  }
  if (st.exact) out << "  order: exact\n";
  else if (st.orders.empty()) out << "  order: unresolved (errors at rounding level)\n";
  else out << "  observed order: " << std::setprecision(3) << st.min_order() << "\n";
}

}  // namespace

ConvergeReport converge_study(const ConvergeOptions& opt) {
  Scenario sc = default_scenario(opt.scenario);
  if (opt.m > 0) sc.m = opt.m;
  sc.validate();
  // Flat-fiber flows never collapse, and their RK4 errors at dt = 0.01 sit
  // near rounding level.
  const bool collapsing = sc.homogeneous() || sc.fiber() == FiberKind::round_sphere;
  const double dt = opt.dt > 0.0 ? opt.dt : (collapsing ? 0.01 : 0.05);
  const double t_end = opt.t_end > 0.0 ? opt.t_end : default_t_end(sc);
  if (auto ts = singular_time(sc); ts && !(t_end < *ts)) {
    throw std::invalid_argument("converge: t_end must precede the singular time");
  }
  ConvergeReport rep;
  rep.scenario = sc.id;
  // Time-stepping error does not depend on m, and a coarse grid keeps the
  // diffusive stability limit from pinning dt0.
  Scenario coarse = sc;
  if (opt.m == 0) coarse.m = std::min<std::size_t>(sc.m, 16);
  rep.temporal = temporal_study(coarse, dt, t_end);
  rep.spatial = spatial_study(sc, t_end);
  rep.s_residual = s_residual_study(sc, &rep.literal_coupling_residual);
  return rep;
}

int cmd_converge(const ConvergeOptions& opt, const std::string& json_path,
                 std::ostream& out, std::ostream& err) {
  ConvergeReport rep;
  try {
    rep = converge_study(opt);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "converge failed: " << e.what() << "\n";
    return kExitFailed;
  }
  out << "scenario: " << to_string(rep.scenario) << "\n";
  print_study(out, rep.temporal, "dt");
  print_study(out, rep.spatial, "h ");
  print_study(out, rep.s_residual, "h ");
  if (rep.s_residual.applicable) {
    out << "  residual with coupling alpha (finest level): " << std::setprecision(4)
        << rep.literal_coupling_residual << "\n";
  }
  if (!json_path.empty()) {
    ordered_json j;
    j["scenario"] = to_string(rep.scenario);
    j["temporal"] = study_json(rep.temporal);
    j["spatial"] = study_json(rep.spatial);
    j["S_residual"] = study_json(rep.s_residual);
    j["literal_coupling_residual"] = rep.literal_coupling_residual;
    try {
      io::write_atomic(json_path, j.dump(2) + "\n");
    } catch (const std::exception& e) {
      err << "output error: " << e.what() << "\n";
      return kExitIo;
    }
  }
  return kExitOk;
}

std::vector<ScenarioId> parse_scenario_list(const std::string& text) {
  std::vector<ScenarioId> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (item == "all") {
      const auto& all = all_scenarios();
      out.insert(out.end(), all.begin(), all.end());
      continue;
    }
    out.push_back(scenario_from_string(item));
  }
  return out;
}

}  // namespace rhflow::cli

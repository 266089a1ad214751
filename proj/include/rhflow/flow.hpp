#pragma once

// Method-of-lines integration of the reduced Ricci-Harmonic flow
//
//     d/dt g = -2 Ric + alpha dphi (x) dphi,    d/dt phi = tau_g phi,
//
// which on a warped state becomes
//
//     f_t   = f [ (n-1) psi_ss/psi + (alpha/2) phi_s^2 ]
//     psi_t = psi_ss - (n-2)(c - psi_s^2)/psi
//     u_t   = phi_ss + (n-1)(psi_s/psi) phi_s
//
// with classical RK4 in time. No gauge fixing is applied: the warped ansatz
// itself fixes the diffeomorphism freedom, and the winding w never changes.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rhflow/geometry.hpp"
#include "rhflow/kernels.hpp"
#include "rhflow/monitor.hpp"

namespace rhflow {

enum class Termination { reached_t_end, blowup_threshold, nonfinite, interrupted };
std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct FlowConfig {
  std::string scenario;
  double t_end = 1.0;
  double c_cfl = 0.1;
  double dt_max = 0.0;  // 0 disables the cap
  double blowup_threshold = 1e6;
  double epsilon0 = 1e-8;
  std::size_t record_every = 1;
  int max_retries = 20;
  std::size_t max_steps = 0;  // 0: unlimited; otherwise stop as `interrupted`
  // Test fixture: integrate with the sign of the alpha term flipped.
  bool flip_alpha_sign = false;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct TrajectoryEntry {
  WarpedState state;
  MonitorRecord record;
};

struct Trajectory {
  std::vector<TrajectoryEntry> entries;
  Termination termination = Termination::reached_t_end;
  std::size_t steps = 0;
  std::size_t rejected = 0;

  const WarpedState& final_state() const { return entries.back().state; }
  std::vector<MonitorRecord> records() const;
};

/// Time derivatives of (f, psi, u). Validates the state.
kernels::Derivatives rhs(const WarpedState& state);
kernels::Derivatives rhs(const WarpedState& state, double flow_alpha);

/// Largest step allowed at `state`: min(c_cfl min_i (f_i h)^2, c_cfl/max|Rm|,
/// dt_max).
double stable_dt(const WarpedState& state, const CurvatureFields& fields,
                 const FlowConfig& config);

/// One RK4 step. Returns nullopt if any stage or the result is non-finite or
/// f, psi lose positivity.
std::optional<WarpedState> step(const WarpedState& state, double dt,
                                double flow_alpha);
std::optional<WarpedState> step(const WarpedState& state, double dt);

/// Resumable integrator behind run(); the CLI checkpoints its members.
class FlowRunner {
 public:
  FlowRunner(FlowConfig config, WarpedState initial);

  /// Rebuild a runner from checkpointed data.
  static FlowRunner restore(FlowConfig config, WarpedState state,
                            MonitorAccumulator acc, MonitorRecord last,
                            std::size_t steps, std::size_t rejected);

  bool done() const { return termination_.has_value(); }
  std::optional<Termination> termination() const { return termination_; }

  /// Take one accepted step (with retries) and update monitors. Invokes the
  /// callback when the step produced an output record.
  void advance();

  /// Drop the stored entries (keeps the integrator state).
  void clear_entries() { entries_.clear(); }

  std::function<void(const TrajectoryEntry&)> on_record;

  const FlowConfig& config() const { return config_; }
  const WarpedState& state() const { return state_; }
  const MonitorAccumulator& accumulator() const { return acc_; }
  const MonitorRecord& last_record() const { return last_; }
  std::size_t steps() const { return steps_; }
  std::size_t rejected() const { return rejected_; }
  const std::vector<TrajectoryEntry>& entries() const { return entries_; }

  /// Stop the runner as interrupted (no further steps).
  void interrupt() { termination_ = Termination::interrupted; }

  Trajectory take_trajectory();

 private:
  FlowRunner() = default;
  void emit(bool force);
  void check_threshold();

  FlowConfig config_;
  WarpedState state_;
  CurvatureFields fields_;
  MonitorAccumulator acc_;
  MonitorRecord last_;
  std::size_t steps_ = 0;
  std::size_t rejected_ = 0;
  std::optional<Termination> termination_;
  std::vector<TrajectoryEntry> entries_;
  bool emitted_any_ = false;
  std::size_t last_emitted_ = 0;
};

Trajectory run(const FlowConfig& config, const WarpedState& initial);

// --- spatially homogeneous products --------------------------------------

struct HomogeneousEntry {
  HomogeneousState state;
  MonitorRecord record;
};

struct HomogeneousTrajectory {
  std::vector<HomogeneousEntry> entries;
  Termination termination = Termination::reached_t_end;
  std::size_t steps = 0;

  const HomogeneousState& final_state() const { return entries.back().state; }
  std::vector<MonitorRecord> records() const;
};

/// d/dt of each factor coefficient: -2(k-1) for a round S^k, alpha w^2 for a
/// flat circle with map slope w.
std::vector<double> rhs_homogeneous(const HomogeneousState& state);

MonitorRecord homogeneous_record(const HomogeneousState& state, double eps0);

HomogeneousTrajectory run_homogeneous(const FlowConfig& config,
                                      const HomogeneousState& initial);

}  // namespace rhflow

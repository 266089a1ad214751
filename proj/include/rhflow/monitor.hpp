#pragma once

// Per-step monitor records accumulated along a flow.

#include <cstddef>

#include "rhflow/geometry.hpp"

namespace rhflow {

struct MonitorRecord {
  std::size_t step = 0;
  double t = 0.0;
  double dt = 0.0;  // size of the step that produced this record
  double min_S = 0.0;
  double max_S = 0.0;
  double max_R = 0.0;
  double max_abs_R = 0.0;
  double max_grad_phi_sq = 0.0;
  double max_ric = 0.0;  // operator norm
  double max_rm = 0.0;   // max |Rm| = sqrt(rm_sq)
  double max_weyl = 0.0;
  bool scalar_target = true;
  double phi_min = 0.0;
  double phi_max = 0.0;
  double length = 0.0;
  double volume = 0.0;
  double dvdt_integrand = 0.0;  // integral of (-R + alpha/2 |grad phi|^2) dv
  double dvdt_residual = 0.0;   // |dV/dt - integrand|, trapezoidal in time
  double dvdt_rel_residual = 0.0;
  double c_meas = 0.0;  // sup of 2|Ric|_op + 2 alpha |grad phi|^2 so far
  double c_vol = 0.0;   // sup of |R| + alpha/2 |grad phi|^2 so far
  double sup_R = 0.0;
  double min_S0 = 0.0;
  double grad_margin = 0.0;
  double rm_ratio = 0.0;  // max|Rm| / (1 + max|Ric|)
  double norm_R_raw = 0.0;  // int_0^t int_M |R|^{(n+2)/2}
  double norm_W_raw = 0.0;  // int_0^t int_M |W|^{(n+2)/2}
};

/// Spatial integrals of |R|^{(n+2)/2} and |W|^{(n+2)/2} against dv.
struct CurvatureIntegrals {
  double R_pow = 0.0;
  double W_pow = 0.0;
  double dvdt = 0.0;
};
CurvatureIntegrals curvature_integrals(const WarpedState& state,
                                       const CurvatureFields& fields);

/// Running state behind MonitorRecord. Plain data so checkpoints can hold it.
struct MonitorAccumulator {
  double epsilon0 = 1e-8;
  bool started = false;
  double prev_t = 0.0;
  double prev_volume = 0.0;
  double prev_dvdt = 0.0;
  double prev_R_pow = 0.0;
  double prev_W_pow = 0.0;
  double c_meas = 0.0;
  double c_vol = 0.0;
  double sup_R = 0.0;
  double min_S0 = 0.0;
  double norm_R_raw = 0.0;
  double norm_W_raw = 0.0;

  /// `fields` must be compute_curvature(state).
  MonitorRecord observe(const WarpedState& state, const CurvatureFields& fields,
                        std::size_t step, double dt);
};

/// Record of a single state with no history (accumulators at their t0 values).
MonitorRecord snapshot_record(const WarpedState& state,
                              const CurvatureFields& fields);

}  // namespace rhflow

#pragma once

// Monitors that check estimates along a trajectory, and the blow-up toolkit
// (point picker, parabolic rescaling, ball-volume fit, spacetime norms).
//
// All check_* functions return nonnegative violations or residuals; the
// caller compares them with a tolerance.

#include <cstddef>
#include <span>
#include <vector>

#include "rhflow/flow.hpp"
#include "rhflow/geometry.hpp"
#include "rhflow/monitor.hpp"

namespace rhflow {

/// Coupling for which the S-evolution identity is exact under the flow
/// d/dt g = -2Ric + alpha dphi(x)dphi: the S-tensor R_ij - (alpha/2) phi_i phi_j.
double identity_coupling(double alpha);

/// || (d/dt - Lap) S - 2|S_ij|^2 - 2 beta |tau phi|^2 ||_inf at the middle
/// snapshot, with S and S_ij built from coupling beta. The time derivative is
/// the three-point second-order formula (uniform or not).
double monitor_S_evolution(const WarpedState& prev, const WarpedState& cur,
                           const WarpedState& next, double coupling);
double monitor_S_evolution(const WarpedState& prev, const WarpedState& cur,
                           const WarpedState& next);
/// Window centred on entry `center`; throws std::invalid_argument without
/// neighbours on both sides.
double monitor_S_evolution(const Trajectory& traj, std::size_t center,
                           double coupling);

struct MonotoneCheck {
  double worst_drop = 0.0;    // max_k (min_S(k) - min_S(k+1))^+
  double worst_scaled = 0.0;  // same, divided by 1 + |min_S(k)|
};
MonotoneCheck check_min_S_monotone(std::span<const MonitorRecord> records);

/// min_t [ sup_{t'<=t} max R + eps0 - min S(0) - alpha max|grad phi|^2 ].
double check_gradient_bound(std::span<const MonitorRecord> records,
                            double alpha, double eps0);

struct MaxPrincipleCheck {
  bool applicable = false;  // scalar targets only
  double violation = 0.0;
  double oscillation = 0.0;  // osc of phi at the first record
};
MaxPrincipleCheck check_phi_max_principle(std::span<const MonitorRecord> records);

struct DistortionCheck {
  double coefficient_excess = 0.0;  // |log ratio| beyond C_meas |t - t0|
  double length_excess = 0.0;       // arc-length ratio beyond e^{C|t-t0|/2}
  double c_meas = 0.0;              // sup over the window
  double worst() const;
};
/// Compares every entry in [i0, i1] against entry i0.
DistortionCheck check_metric_distortion(const Trajectory& traj, std::size_t i0,
                                        std::size_t i1);
DistortionCheck check_metric_distortion(const Trajectory& traj);

struct VolumeCheck {
  double derivative_residual = 0.0;  // max |dV/dt - int(-R + alpha/2 |dphi|^2)|
  double relative_residual = 0.0;    // dimensionless per-step version
  double lower_bound_margin = 0.0;   // min_k (V_k - e^{-C'(t_k-t0)} V_0)/V_0
  double c_vol = 0.0;
};
VolumeCheck check_volume_evolution(const Trajectory& traj);

struct BlowupPoint {
  std::size_t entry = 0;
  double t = 0.0;
  std::size_t grid_index = 0;
  double x = 0.0;
  double Q = 0.0;            // |Rm| at the picked point
  double running_max = 0.0;  // max |Rm| over [0, t]
};
/// Entries past the first growth of max|Rm| whose pointwise |Rm| maximum Q
/// satisfies Q >= running_max / c_pick, with Q nondecreasing along the list.
std::vector<BlowupPoint> pick_blowup_points(const Trajectory& traj,
                                            double c_pick);

struct RescaledState {
  WarpedState base;
  double Q = 1.0;
  WarpedState rescaled;  // clock restarted at 0
  double scaling_error = 0.0;  // max rel. error of |Rm|/Q, S/Q, |dphi|^2/Q
};
RescaledState parabolic_rescale(const WarpedState& state, double Q);

/// Exact geodesic ball volume in a product of at most one round sphere with
/// flat circles, valid below the injectivity radius.
double ball_volume(const HomogeneousState& geometry, double r);

struct ExpansionFit {
  double c = 0.0;          // fitted Vol = w_n r^n (1 - c r^2)
  double predicted = 0.0;  // R / (6(n+2))
  double omega_n = 0.0;
  double min_ratio = 0.0;  // min Vol/(w_n r^n) over the radii
};
ExpansionFit ball_volume_expansion_fit(const HomogeneousState& geometry,
                                       std::span<const double> radii);

struct SpacetimeNorms {
  double R_raw = 0.0;   // int_0^T int_M |R|^{(n+2)/2}
  double W_raw = 0.0;
  double R_norm = 0.0;  // raw^{2/(n+2)}
  double W_norm = 0.0;
};
SpacetimeNorms spacetime_norms(const Trajectory& traj);

struct RatioSample {
  double t;
  double ratio;  // max|Rm| / (1 + max|Ric|)
};
std::vector<RatioSample> curvature_ratio_diagnostic(
    std::span<const MonitorRecord> records);
/// max/min of the ratio series (1 for an empty or all-zero series).
double ratio_spread(std::span<const RatioSample> series);

}  // namespace rhflow

#include "rhflow/monitor.hpp"

#include <algorithm>
#include <cmath>

namespace rhflow {

CurvatureIntegrals curvature_integrals(const WarpedState& state,
                                       const CurvatureFields& fields) {
  const double h = kTwoPi / static_cast<double>(state.size());
  const double p = 0.5 * (state.n + 2);
  const double vf = fiber_volume(state.fiber, state.n);
  CurvatureIntegrals out;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double dv = vf * h * state.f[i] * std::pow(state.psi[i], state.n - 1);
    out.R_pow += std::pow(std::abs(fields.R[i]), p) * dv;
    out.W_pow += std::pow(fields.weyl_sq[i], 0.5 * p) * dv;
    out.dvdt += (-fields.R[i] + 0.5 * state.alpha * fields.grad_phi_sq[i]) * dv;
  }
  return out;
}

namespace {

void fill_pointwise(const WarpedState& state, const CurvatureFields& c,
                    MonitorRecord& r) {
  r.t = state.t;
  r.min_S = min_of(c.S);
  r.max_S = max_of(c.S);
  r.max_R = max_of(c.R);
  r.max_abs_R = 0.0;
  r.max_grad_phi_sq = max_of(c.grad_phi_sq);
  r.max_ric = 0.0;
  double rm_sq = 0.0, weyl_sq = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    r.max_abs_R = std::max(r.max_abs_R, std::abs(c.R[i]));
    r.max_ric = std::max(
        {r.max_ric, std::abs(c.ric_rad[i]), std::abs(c.ric_fib[i])});
    rm_sq = std::max(rm_sq, c.rm_sq[i]);
    weyl_sq = std::max(weyl_sq, c.weyl_sq[i]);
  }
  r.max_rm = std::sqrt(rm_sq);
  r.max_weyl = std::sqrt(weyl_sq);
  r.rm_ratio = r.max_rm / (1.0 + r.max_ric);
  r.scalar_target = (state.winding == 0);
  if (r.scalar_target) {
    r.phi_min = min_of(state.phi_per);
    r.phi_max = max_of(state.phi_per);
  }
  const LengthVolume lv = reduced_lengths_and_volume(state);
  r.length = lv.length;
  r.volume = lv.volume;
}

}  // namespace

MonitorRecord MonitorAccumulator::observe(const WarpedState& state,
                                          const CurvatureFields& fields,
                                          std::size_t step, double dt) {
  MonitorRecord r;
  r.step = step;
  r.dt = dt;
  fill_pointwise(state, fields, r);
  const CurvatureIntegrals ints = curvature_integrals(state, fields);
  r.dvdt_integrand = ints.dvdt;

  const double alpha = state.alpha;
  const double c_now = 2.0 * r.max_ric + 2.0 * alpha * r.max_grad_phi_sq;
  const double cv_now = r.max_abs_R + 0.5 * alpha * r.max_grad_phi_sq;
  if (!started) {
    started = true;
    min_S0 = r.min_S;
    sup_R = r.max_R;
    c_meas = c_now;
    c_vol = cv_now;
  } else {
    const double span = state.t - prev_t;
    const double dv = r.volume - prev_volume;
    const double mid = 0.5 * (ints.dvdt + prev_dvdt) * span;
    r.dvdt_residual = std::abs(dv / span - mid / span);
    const double denom =
        std::max({std::abs(dv), std::abs(mid), 1e-13 * r.volume});
    r.dvdt_rel_residual = std::abs(dv - mid) / denom;
    norm_R_raw += 0.5 * span * (ints.R_pow + prev_R_pow);
    norm_W_raw += 0.5 * span * (ints.W_pow + prev_W_pow);
    sup_R = std::max(sup_R, r.max_R);
    c_meas = std::max(c_meas, c_now);
    c_vol = std::max(c_vol, cv_now);
  }
  prev_t = state.t;
  prev_volume = r.volume;
  prev_dvdt = ints.dvdt;
  prev_R_pow = ints.R_pow;
  prev_W_pow = ints.W_pow;

  r.c_meas = c_meas;
  r.c_vol = c_vol;
  r.sup_R = sup_R;
  r.min_S0 = min_S0;
  r.grad_margin = sup_R + epsilon0 - min_S0 - alpha * r.max_grad_phi_sq;
  r.norm_R_raw = norm_R_raw;
  r.norm_W_raw = norm_W_raw;
  return r;
}

MonitorRecord snapshot_record(const WarpedState& state,
                              const CurvatureFields& fields) {
  MonitorAccumulator acc;
  return acc.observe(state, fields, 0, 0.0);
}

}  // namespace rhflow

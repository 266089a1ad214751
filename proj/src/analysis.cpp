#include "rhflow/analysis.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rhflow/kernels.hpp"

namespace rhflow {

double identity_coupling(double alpha) { return 0.5 * alpha; }

double monitor_S_evolution(const WarpedState& prev, const WarpedState& cur,
                           const WarpedState& next) {
  return monitor_S_evolution(prev, cur, next, identity_coupling(cur.alpha));
}

double monitor_S_evolution(const WarpedState& prev, const WarpedState& cur,
                           const WarpedState& next, double coupling) {
  const std::size_t m = cur.size();
  if (prev.size() != m || next.size() != m || prev.n != cur.n ||
      next.n != cur.n) {
    throw std::invalid_argument("monitor_S_evolution: snapshots do not match");
  }
  const double h1 = cur.t - prev.t;
  const double h2 = next.t - cur.t;
  if (!(h1 > 0.0) || !(h2 > 0.0)) {
    throw std::invalid_argument(
        "monitor_S_evolution: snapshot times must increase");
  }
  const CurvatureFields c_prev = compute_curvature(prev, coupling);
  const CurvatureFields c_cur = compute_curvature(cur, coupling);
  const CurvatureFields c_next = compute_curvature(next, coupling);

  std::vector<double> lap_S(m);
  kernels::laplacian_serial(cur.n, kTwoPi / static_cast<double>(m), cur.f,
                            cur.psi, c_cur.S, 0.0, lap_S);

  const double wm = -h2 / (h1 * (h1 + h2));
  const double w0 = (h2 - h1) / (h1 * h2);
  const double wp = h1 / (h2 * (h1 + h2));
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dSdt = wm * c_prev.S[i] + w0 * c_cur.S[i] + wp * c_next.S[i];
    const double tau = c_cur.lap_phi[i];
    const double res = dSdt - lap_S[i] - 2.0 * c_cur.s_tensor_sq[i] -
                       2.0 * coupling * tau * tau;
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

double monitor_S_evolution(const Trajectory& traj, std::size_t center,
                           double coupling) {
  if (center == 0 || center + 1 >= traj.entries.size()) {
    throw std::invalid_argument(
        "monitor_S_evolution: need snapshots on both sides of the centre");
  }
  return monitor_S_evolution(traj.entries[center - 1].state,
                             traj.entries[center].state,
                             traj.entries[center + 1].state, coupling);
}

MonotoneCheck check_min_S_monotone(std::span<const MonitorRecord> records) {
  MonotoneCheck out;
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const double drop = records[k].min_S - records[k + 1].min_S;
    if (drop > 0.0) {
      out.worst_drop = std::max(out.worst_drop, drop);
      out.worst_scaled =
          std::max(out.worst_scaled, drop / (1.0 + std::abs(records[k].min_S)));
    }
  }
  return out;
}

double check_gradient_bound(std::span<const MonitorRecord> records,
                            double alpha, double eps0) {
  if (records.empty()) return std::numeric_limits<double>::infinity();
  const double min_S0 = records.front().min_S;
  double sup_R = -std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    sup_R = std::max(sup_R, r.max_R);
    margin = std::min(margin,
                      sup_R + eps0 - min_S0 - alpha * r.max_grad_phi_sq);
  }
  return margin;
}

MaxPrincipleCheck check_phi_max_principle(
    std::span<const MonitorRecord> records) {
  MaxPrincipleCheck out;
  if (records.empty() || !records.front().scalar_target) return out;
  out.applicable = true;
  const double lo = records.front().phi_min;
  const double hi = records.front().phi_max;
  out.oscillation = hi - lo;
  for (const auto& r : records) {
    out.violation = std::max({out.violation, lo - r.phi_min, r.phi_max - hi});
  }
  return out;
}

double DistortionCheck::worst() const {
  return std::max(coefficient_excess, length_excess);
}

DistortionCheck check_metric_distortion(const Trajectory& traj) {
  if (traj.entries.empty()) return {};
  return check_metric_distortion(traj, 0, traj.entries.size() - 1);
}

DistortionCheck check_metric_distortion(const Trajectory& traj, std::size_t i0,
                                        std::size_t i1) {
  if (i0 > i1 || i1 >= traj.entries.size()) {
    throw std::invalid_argument("check_metric_distortion: bad window");
  }
  const auto& base = traj.entries[i0];
  const WarpedState& s0 = base.state;
  const double L0 = base.record.length;
  DistortionCheck out;
  double c = 0.0;
  for (std::size_t k = i0; k <= i1; ++k) {
    const auto& e = traj.entries[k];
    const double alpha = e.state.alpha;
    c = std::max(c, 2.0 * e.record.max_ric +
                        2.0 * alpha * e.record.max_grad_phi_sq);
    const double span = std::abs(e.state.t - s0.t);
    const double bound = c * span;
    for (std::size_t i = 0; i < s0.size(); ++i) {
      const double lf = std::abs(2.0 * std::log(e.state.f[i] / s0.f[i]));
      const double lp = std::abs(2.0 * std::log(e.state.psi[i] / s0.psi[i]));
      out.coefficient_excess =
          std::max({out.coefficient_excess, lf - bound, lp - bound});
    }
    const double ll = std::abs(std::log(e.record.length / L0));
    out.length_excess = std::max(out.length_excess, ll - 0.5 * bound);
  }
  out.c_meas = c;
  return out;
}

VolumeCheck check_volume_evolution(const Trajectory& traj) {
  VolumeCheck out;
  if (traj.entries.empty()) return out;
  out.lower_bound_margin = std::numeric_limits<double>::infinity();
  const double V0 = traj.entries.front().record.volume;
  const double t0 = traj.entries.front().state.t;
  double prev_I = 0.0, prev_V = 0.0, prev_t = 0.0;
  for (std::size_t k = 0; k < traj.entries.size(); ++k) {
    const auto& e = traj.entries[k];
    const CurvatureFields c = compute_curvature(e.state);
    const double I = curvature_integrals(e.state, c).dvdt;
    const double V = reduced_lengths_and_volume(e.state).volume;
    out.c_vol = std::max(out.c_vol, e.record.max_abs_R +
                                        0.5 * e.state.alpha *
                                            e.record.max_grad_phi_sq);
    if (k > 0) {
      const double span = e.state.t - prev_t;
      const double dv = V - prev_V;
      const double mid = 0.5 * (I + prev_I) * span;
      out.derivative_residual =
          std::max(out.derivative_residual, std::abs(dv - mid) / span);
      const double denom = std::max({std::abs(dv), std::abs(mid), 1e-13 * V});
      out.relative_residual =
          std::max(out.relative_residual, std::abs(dv - mid) / denom);
    }
    const double bound = std::exp(-out.c_vol * (e.state.t - t0)) * V0;
    out.lower_bound_margin = std::min(out.lower_bound_margin, (V - bound) / V0);
    prev_I = I;
    prev_V = V;
    prev_t = e.state.t;
  }
  return out;
}

std::vector<BlowupPoint> pick_blowup_points(const Trajectory& traj,
                                            double c_pick) {
  if (!(c_pick >= 1.0)) {
    throw std::invalid_argument("pick_blowup_points: c_pick must be >= 1");
  }
  std::vector<BlowupPoint> out;
  double running = 0.0, q0 = 0.0, last_q = 0.0;
  for (std::size_t k = 0; k < traj.entries.size(); ++k) {
    const auto& st = traj.entries[k].state;
    const CurvatureFields c = compute_curvature(st);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
      if (c.rm_sq[i] > c.rm_sq[arg]) arg = i;
    }
    const double q = std::sqrt(c.rm_sq[arg]);
    running = std::max(running, q);
    if (k == 0) {
      q0 = q;
      continue;
    }
    if (q > q0 && q >= running / c_pick && q >= last_q) {
      out.push_back(BlowupPoint{k, st.t, arg, st.grid().x(arg), q, running});
      last_q = q;
    }
  }
  return out;
}

RescaledState parabolic_rescale(const WarpedState& state, double Q) {
  RescaledState out;
  out.base = state;
  out.Q = Q;
  out.rescaled = scale(state, Q);
  out.rescaled.t = 0.0;

  const CurvatureFields cb = compute_curvature(state);
  const CurvatureFields cr = compute_curvature(out.rescaled);
  auto rel = [](double got, double want) {
    const double d = std::abs(got - want);
    return want != 0.0 ? d / std::abs(want) : d;
  };
  const double rm_b = std::sqrt(max_of(cb.rm_sq));
  const double rm_r = std::sqrt(max_of(cr.rm_sq));
  double err = rel(rm_r * Q, rm_b);
  double s_scale = 0.0, g_scale = 0.0;
  for (std::size_t i = 0; i < cb.size(); ++i) {
    s_scale = std::max(s_scale, std::abs(cb.S[i]));
    g_scale = std::max(g_scale, cb.grad_phi_sq[i]);
  }
  double s_err = 0.0, g_err = 0.0;
  for (std::size_t i = 0; i < cb.size(); ++i) {
    s_err = std::max(s_err, std::abs(cr.S[i] * Q - cb.S[i]));
    g_err = std::max(g_err, std::abs(cr.grad_phi_sq[i] * Q - cb.grad_phi_sq[i]));
  }
  err = std::max(err, s_scale > 0.0 ? s_err / s_scale : s_err);
  err = std::max(err, g_scale > 0.0 ? g_err / g_scale : g_err);
  out.scaling_error = err;
  return out;
}

double ball_volume(const HomogeneousState& geometry, double r) {
  validate(geometry);
  if (!(r > 0.0)) throw std::invalid_argument("ball_volume: r must be positive");
  const int n = geometry.dimension();
  int flat_dims = 0;
  const ProductFactor* sphere = nullptr;
  for (const auto& fac : geometry.factors) {
    const double radius = std::sqrt(fac.coefficient);
    if (fac.kind == FactorKind::round_sphere) {
      if (sphere) {
        throw std::invalid_argument(
            "ball_volume: at most one round sphere factor is supported");
      }
      sphere = &fac;
    } else {
      ++flat_dims;
    }
    // injectivity radius of the factor is pi * radius
    if (!(r < M_PI * radius)) {
      throw std::invalid_argument("ball_volume: r exceeds the injectivity radius");
    }
  }
  if (!sphere) return unit_ball_volume(n) * std::pow(r, n);

  const int k = sphere->dimension;
  const double rho0 = std::sqrt(sphere->coefficient);
  const double shell = unit_sphere_volume(k - 1);
  const double flat_ball = flat_dims > 0 ? unit_ball_volume(flat_dims) : 1.0;
  // rho = r sin(theta) on the sphere, r cos(theta) in the flat directions
  auto integrand = [&](double theta) {
    const double rho = r * std::sin(theta);
    const double c = std::cos(theta);
    const double area = shell * std::pow(rho0 * std::sin(rho / rho0), k - 1);
    return area * flat_ball * std::pow(r * c, flat_dims) * r * c;
  };
  return boost::math::quadrature::gauss<double, 40>::integrate(integrand, 0.0,
                                                               0.5 * M_PI);
}

ExpansionFit ball_volume_expansion_fit(const HomogeneousState& geometry,
                                       std::span<const double> radii) {
  if (radii.empty()) {
    throw std::invalid_argument("ball_volume_expansion_fit: no radii");
  }
  const int n = geometry.dimension();
  ExpansionFit fit;
  fit.omega_n = unit_ball_volume(n);
  fit.predicted =
      compute_curvature_homogeneous(geometry).R[0] / (6.0 * (n + 2));
  fit.min_ratio = std::numeric_limits<double>::infinity();
  // least squares for y = c r^2 with y = 1 - Vol/(w_n r^n)
  double num = 0.0, den = 0.0;
  for (double r : radii) {
    const double ratio = ball_volume(geometry, r) / (fit.omega_n * std::pow(r, n));
    fit.min_ratio = std::min(fit.min_ratio, ratio);
    const double y = 1.0 - ratio;
    num += y * r * r;
    den += r * r * r * r;
  }
  fit.c = num / den;
  return fit;
}

SpacetimeNorms spacetime_norms(const Trajectory& traj) {
  SpacetimeNorms out;
  if (traj.entries.empty()) return out;
  const int n = traj.entries.front().state.n;
  double prev_R = 0.0, prev_W = 0.0, prev_t = 0.0;
  for (std::size_t k = 0; k < traj.entries.size(); ++k) {
    const auto& st = traj.entries[k].state;
    const CurvatureIntegrals ints = curvature_integrals(st, compute_curvature(st));
    if (k > 0) {
      const double span = st.t - prev_t;
      out.R_raw += 0.5 * span * (ints.R_pow + prev_R);
      out.W_raw += 0.5 * span * (ints.W_pow + prev_W);
    }
    prev_R = ints.R_pow;
    prev_W = ints.W_pow;
    prev_t = st.t;
  }
  const double e = 2.0 / (n + 2);
  out.R_norm = std::pow(out.R_raw, e);
  out.W_norm = std::pow(out.W_raw, e);
  return out;
}

std::vector<RatioSample> curvature_ratio_diagnostic(
    std::span<const MonitorRecord> records) {
  std::vector<RatioSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({r.t, r.max_rm / (1.0 + r.max_ric)});
  }
  return out;
}

double ratio_spread(std::span<const RatioSample> series) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : series) {
    lo = std::min(lo, s.ratio);
    hi = std::max(hi, s.ratio);
  }
  if (series.empty() || hi == 0.0) return 1.0;
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace rhflow

#include "rhflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rhflow {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::reached_t_end: return "reached_T_end";
    case Termination::blowup_threshold: return "blowup_threshold";
    case Termination::nonfinite: return "nonfinite";
    case Termination::interrupted: return "interrupted";
  }
  return "unknown";
}

Termination termination_from_string(const std::string& s) {
  if (s == "reached_T_end") return Termination::reached_t_end;
  if (s == "blowup_threshold") return Termination::blowup_threshold;
  if (s == "nonfinite") return Termination::nonfinite;
  if (s == "interrupted") return Termination::interrupted;
  throw std::invalid_argument("unknown termination '" + s + "'");
}

void FlowConfig::validate() const {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) {
    throw std::invalid_argument("t_end must be positive");
  }
  if (!(c_cfl > 0.0 && c_cfl <= 1.0)) {
    throw std::invalid_argument("c_cfl must lie in (0, 1]");
  }
  if (!(dt_max >= 0.0)) throw std::invalid_argument("dt_max must be >= 0");
  if (!(blowup_threshold > 0.0)) {
    throw std::invalid_argument("blowup_threshold must be positive");
  }
  if (!(epsilon0 >= 0.0)) throw std::invalid_argument("epsilon0 must be >= 0");
  if (record_every == 0) throw std::invalid_argument("record_every must be >= 1");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
}

std::vector<MonitorRecord> Trajectory::records() const {
  std::vector<MonitorRecord> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.record);
  return out;
}

std::vector<MonitorRecord> HomogeneousTrajectory::records() const {
  std::vector<MonitorRecord> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.record);
  return out;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// Unvalidated stage evaluation; intermediate RK stages may leave the
// admissible set and are screened by the caller.
bool stage_rhs(const WarpedState& s, double flow_alpha,
               kernels::Derivatives& out) {
  const auto exec = kernels::choose(s.size());
  const auto view = kernels::view_of(s, s.alpha);
  CurvatureFields fields;
  kernels::curvature(view, fields, exec);
  kernels::rhs_from_fields(view, fields, flow_alpha, out, exec);
  return all_finite(out.f_t) && all_finite(out.psi_t) && all_finite(out.u_t);
}

void axpy_state(const WarpedState& base, double a,
                const kernels::Derivatives& k, WarpedState& out) {
  const std::size_t m = base.size();
  for (std::size_t i = 0; i < m; ++i) {
    out.f[i] = base.f[i] + a * k.f_t[i];
    out.psi[i] = base.psi[i] + a * k.psi_t[i];
    out.phi_per[i] = base.phi_per[i] + a * k.u_t[i];
  }
}

bool admissible(const WarpedState& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s.f[i]) || !(s.f[i] > 0.0)) return false;
    if (!std::isfinite(s.psi[i]) || !(s.psi[i] > 0.0)) return false;
    if (!std::isfinite(s.phi_per[i])) return false;
  }
  return true;
}

double effective_alpha(const WarpedState& s, const FlowConfig& c) {
  return c.flip_alpha_sign ? -s.alpha : s.alpha;
}

}  // namespace

kernels::Derivatives rhs(const WarpedState& state) {
  return rhs(state, state.alpha);
}

kernels::Derivatives rhs(const WarpedState& state, double flow_alpha) {
  const CurvatureFields fields = compute_curvature(state);
  kernels::Derivatives out;
  kernels::rhs_from_fields(kernels::view_of(state, state.alpha), fields,
                           flow_alpha, out, kernels::choose(state.size()));
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!std::isfinite(out.f_t[i]) || !std::isfinite(out.psi_t[i]) ||
        !std::isfinite(out.u_t[i])) {
      throw std::runtime_error("rhs: non-finite derivative at grid index " +
                               std::to_string(i));
    }
  }
  return out;
}

double stable_dt(const WarpedState& state, const CurvatureFields& fields,
                 const FlowConfig& config) {
  const double h = kTwoPi / static_cast<double>(state.size());
  const double fh = min_of(state.f) * h;
  double dt = config.c_cfl * fh * fh;
  const double rm = std::sqrt(max_of(fields.rm_sq));
  if (rm > 0.0) dt = std::min(dt, config.c_cfl / rm);
  if (config.dt_max > 0.0) dt = std::min(dt, config.dt_max);
  return dt;
}

std::optional<WarpedState> step(const WarpedState& state, double dt) {
  return step(state, dt, state.alpha);
}

std::optional<WarpedState> step(const WarpedState& state, double dt,
                                double flow_alpha) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step: dt must be positive");
  }
  kernels::Derivatives k1, k2, k3, k4;
  WarpedState stage = state;
  if (!stage_rhs(state, flow_alpha, k1)) return std::nullopt;
  axpy_state(state, 0.5 * dt, k1, stage);
  if (!stage_rhs(stage, flow_alpha, k2)) return std::nullopt;
  axpy_state(state, 0.5 * dt, k2, stage);
  if (!stage_rhs(stage, flow_alpha, k3)) return std::nullopt;
  axpy_state(state, dt, k3, stage);
  if (!stage_rhs(stage, flow_alpha, k4)) return std::nullopt;

  WarpedState out = state;
  const double w = dt / 6.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    out.f[i] = state.f[i] +
               w * (k1.f_t[i] + 2.0 * k2.f_t[i] + 2.0 * k3.f_t[i] + k4.f_t[i]);
    out.psi[i] = state.psi[i] + w * (k1.psi_t[i] + 2.0 * k2.psi_t[i] +
                                     2.0 * k3.psi_t[i] + k4.psi_t[i]);
    out.phi_per[i] = state.phi_per[i] + w * (k1.u_t[i] + 2.0 * k2.u_t[i] +
                                             2.0 * k3.u_t[i] + k4.u_t[i]);
  }
  out.t = state.t + dt;
  if (!admissible(out)) return std::nullopt;
  return out;
}

// --- FlowRunner -------------------------------------------------------------

FlowRunner::FlowRunner(FlowConfig config, WarpedState initial)
    : config_(std::move(config)), state_(std::move(initial)) {
  config_.validate();
  validate(state_);
  fields_ = compute_curvature(state_);
  acc_.epsilon0 = config_.epsilon0;
  last_ = acc_.observe(state_, fields_, 0, 0.0);
  if (!(last_.max_rm < config_.blowup_threshold)) {
    throw std::invalid_argument(
        "blowup_threshold must exceed the initial max |Rm|");
  }
  emit(true);
}

FlowRunner FlowRunner::restore(FlowConfig config, WarpedState state,
                               MonitorAccumulator acc, MonitorRecord last,
                               std::size_t steps, std::size_t rejected) {
  FlowRunner r;
  r.config_ = std::move(config);
  r.config_.validate();
  r.state_ = std::move(state);
  validate(r.state_);
  r.fields_ = compute_curvature(r.state_);
  r.acc_ = acc;
  r.last_ = last;
  r.steps_ = steps;
  r.rejected_ = rejected;
  // Matches the cadence test in emit() for the step the checkpoint ended on.
  if (steps % r.config_.record_every == 0) {
    r.emitted_any_ = true;
    r.last_emitted_ = steps;
  }
  return r;
}

void FlowRunner::emit(bool force) {
  if (!force && steps_ % config_.record_every != 0) return;
  if (emitted_any_ && last_emitted_ == steps_) return;
  emitted_any_ = true;
  last_emitted_ = steps_;
  entries_.push_back(TrajectoryEntry{state_, last_});
  if (on_record) on_record(entries_.back());
}

void FlowRunner::advance() {
  if (done()) return;
  if (config_.max_steps > 0 && steps_ >= config_.max_steps) {
    termination_ = Termination::interrupted;
    return;
  }
  const double remaining = config_.t_end - state_.t;
  double dt = stable_dt(state_, fields_, config_);
  bool final_step = false;
  if (dt >= remaining) {
    dt = remaining;
    final_step = true;
  }
  if (!(state_.t + dt > state_.t)) {
    // The step no longer advances the clock.
    termination_ = Termination::nonfinite;
    emit(true);
    return;
  }
  const double flow_alpha = effective_alpha(state_, config_);
  std::optional<WarpedState> next;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    next = step(state_, dt, flow_alpha);
    if (next) break;
    ++rejected_;
    dt *= 0.5;
    final_step = false;
  }
  if (!next) {
    termination_ = Termination::nonfinite;
    emit(true);
    return;
  }
  if (final_step) next->t = config_.t_end;
  state_ = std::move(*next);
  ++steps_;
  const auto view = kernels::view_of(state_, state_.alpha);
  kernels::curvature(view, fields_, kernels::choose(state_.size()));
  last_ = acc_.observe(state_, fields_, steps_, dt);

  if (!std::isfinite(last_.max_rm) || !std::isfinite(last_.volume)) {
    termination_ = Termination::nonfinite;
  } else if (last_.max_rm >= config_.blowup_threshold) {
    termination_ = Termination::blowup_threshold;
  } else if (final_step) {
    termination_ = Termination::reached_t_end;
  }
  emit(termination_.has_value());
}

Trajectory FlowRunner::take_trajectory() {
  Trajectory t;
  t.entries = std::move(entries_);
  entries_.clear();
  t.termination = termination_.value_or(Termination::interrupted);
  t.steps = steps_;
  t.rejected = rejected_;
  return t;
}

Trajectory run(const FlowConfig& config, const WarpedState& initial) {
  FlowRunner runner(config, initial);
  while (!runner.done()) runner.advance();
  return runner.take_trajectory();
}

// --- homogeneous ------------------------------------------------------------

std::vector<double> rhs_homogeneous(const HomogeneousState& state) {
  validate(state);
  std::vector<double> out;
  out.reserve(state.factors.size());
  for (const auto& fac : state.factors) {
    if (fac.kind == FactorKind::round_sphere) {
      out.push_back(-2.0 * (fac.dimension - 1));
    } else {
      out.push_back(state.alpha * fac.slope * fac.slope);
    }
  }
  return out;
}

MonitorRecord homogeneous_record(const HomogeneousState& state, double eps0) {
  const CurvatureFields c = compute_curvature_homogeneous(state);
  MonitorRecord r;
  r.t = state.t;
  r.min_S = r.max_S = c.S[0];
  r.max_R = c.R[0];
  r.max_abs_R = std::abs(c.R[0]);
  r.max_grad_phi_sq = c.grad_phi_sq[0];
  r.max_ric = c.ric_rad[0];
  r.max_rm = std::sqrt(c.rm_sq[0]);
  r.max_weyl = std::sqrt(c.weyl_sq[0]);
  r.rm_ratio = r.max_rm / (1.0 + r.max_ric);
  r.scalar_target = false;
  r.volume = homogeneous_volume(state);
  r.dvdt_integrand =
      (-c.R[0] + 0.5 * state.alpha * c.grad_phi_sq[0]) * r.volume;
  r.c_meas = 2.0 * r.max_ric + 2.0 * state.alpha * r.max_grad_phi_sq;
  r.c_vol = r.max_abs_R + 0.5 * state.alpha * r.max_grad_phi_sq;
  r.sup_R = r.max_R;
  r.min_S0 = r.min_S;
  r.grad_margin = r.sup_R + eps0 - r.min_S0 - state.alpha * r.max_grad_phi_sq;
  return r;
}

HomogeneousTrajectory run_homogeneous(const FlowConfig& config,
                                      const HomogeneousState& initial) {
  config.validate();
  validate(initial);
  HomogeneousTrajectory traj;
  HomogeneousState state = initial;
  MonitorRecord first = homogeneous_record(state, config.epsilon0);
  if (!(first.max_rm < config.blowup_threshold)) {
    throw std::invalid_argument(
        "blowup_threshold must exceed the initial max |Rm|");
  }
  traj.entries.push_back({state, first});
  double c_meas = first.c_meas, c_vol = first.c_vol, sup_R = first.sup_R;
  const double min_S0 = first.min_S;
  const std::size_t nf = state.factors.size();

  auto eval = [&](const HomogeneousState& s, std::vector<double>& k) {
    for (std::size_t j = 0; j < nf; ++j) {
      const auto& fac = s.factors[j];
      k[j] = fac.kind == FactorKind::round_sphere
                 ? -2.0 * (fac.dimension - 1)
                 : s.alpha * fac.slope * fac.slope;
    }
  };

  while (true) {
    const double remaining = config.t_end - state.t;
    const MonitorRecord& cur = traj.entries.back().record;
    std::vector<double> rate(nf);
    eval(state, rate);
    double dt = remaining;
    if (config.dt_max > 0.0) dt = std::min(dt, config.dt_max);
    if (cur.max_rm > 0.0) dt = std::min(dt, config.c_cfl / cur.max_rm);
    for (std::size_t j = 0; j < nf; ++j) {
      if (rate[j] != 0.0) {
        dt = std::min(dt, config.c_cfl * state.factors[j].coefficient /
                              std::abs(rate[j]));
      }
    }
    bool final_step = dt >= remaining;
    std::optional<HomogeneousState> next;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      HomogeneousState stage = state;
      std::vector<double> k1(nf), k2(nf), k3(nf), k4(nf);
      eval(state, k1);
      for (std::size_t j = 0; j < nf; ++j)
        stage.factors[j].coefficient = state.factors[j].coefficient + 0.5 * dt * k1[j];
      eval(stage, k2);
      for (std::size_t j = 0; j < nf; ++j)
        stage.factors[j].coefficient = state.factors[j].coefficient + 0.5 * dt * k2[j];
      eval(stage, k3);
      for (std::size_t j = 0; j < nf; ++j)
        stage.factors[j].coefficient = state.factors[j].coefficient + dt * k3[j];
      eval(stage, k4);
      HomogeneousState out = state;
      bool ok = true;
      for (std::size_t j = 0; j < nf; ++j) {
        out.factors[j].coefficient =
            state.factors[j].coefficient +
            dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        const double a = out.factors[j].coefficient;
        ok = ok && std::isfinite(a) && a > 0.0;
      }
      if (ok) {
        out.t = final_step ? config.t_end : state.t + dt;
        next = out;
        break;
      }
      dt *= 0.5;
      final_step = false;
    }
    if (!next) {
      traj.termination = Termination::nonfinite;
      break;
    }
    state = *next;
    ++traj.steps;
    MonitorRecord r = homogeneous_record(state, config.epsilon0);
    r.step = traj.steps;
    r.dt = dt;
    c_meas = std::max(c_meas, r.c_meas);
    c_vol = std::max(c_vol, r.c_vol);
    sup_R = std::max(sup_R, r.max_R);
    r.c_meas = c_meas;
    r.c_vol = c_vol;
    r.sup_R = sup_R;
    r.min_S0 = min_S0;
    r.grad_margin =
        sup_R + config.epsilon0 - min_S0 - state.alpha * r.max_grad_phi_sq;
    std::optional<Termination> term;
    if (r.max_rm >= config.blowup_threshold) {
      term = Termination::blowup_threshold;
    } else if (final_step) {
      term = Termination::reached_t_end;
    }
    if (term || traj.steps % config.record_every == 0) {
      traj.entries.push_back({state, r});
    }
    if (term) {
      traj.termination = *term;
      break;
    }
    if (config.max_steps > 0 && traj.steps >= config.max_steps) {
      traj.termination = Termination::interrupted;
      break;
    }
  }
  return traj;
}

}  // namespace rhflow

#include "rhflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rhflow/kernels.hpp"

namespace rhflow {

namespace {

void check_array(const std::vector<double>& v, const char* name,
                 bool positive) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || (positive && !(v[i] > 0.0))) {
      std::ostringstream msg;
      msg << "warped state: " << name << "[" << i << "] = " << v[i]
          << (positive ? " is not finite and positive" : " is not finite");
      throw std::invalid_argument(msg.str());
    }
  }
}

}  // namespace

double fiber_curvature(FiberKind kind) {
  return kind == FiberKind::round_sphere ? 1.0 : 0.0;
}

std::string to_string(FiberKind kind) {
  return kind == FiberKind::round_sphere ? "round_sphere" : "flat_torus";
}

FiberKind fiber_kind_from_string(const std::string& name) {
  if (name == "round_sphere") return FiberKind::round_sphere;
  if (name == "flat_torus") return FiberKind::flat_torus;
  throw std::invalid_argument("unknown fiber kind '" + name + "'");
}

GridGeometry GridGeometry::periodic(std::size_t m) {
  if (m < 8) {
    throw std::invalid_argument("grid needs at least 8 points, got " +
                                std::to_string(m));
  }
  return GridGeometry{m, kTwoPi / static_cast<double>(m)};
}

double WarpedState::phi(std::size_t i) const {
  const double x = kTwoPi * static_cast<double>(i) / static_cast<double>(size());
  return static_cast<double>(winding) * x + phi_per[i];
}

void validate(const WarpedState& state) {
  if (state.n < 2) {
    throw std::invalid_argument("warped state: dimension n must be >= 2");
  }
  if (!(state.alpha >= 0.0) || !std::isfinite(state.alpha)) {
    throw std::invalid_argument("warped state: alpha must be finite and >= 0");
  }
  if (!std::isfinite(state.t)) {
    throw std::invalid_argument("warped state: time is not finite");
  }
  const std::size_t m = state.f.size();
  (void)GridGeometry::periodic(m);
  if (state.psi.size() != m || state.phi_per.size() != m) {
    throw std::invalid_argument("warped state: f, psi, phi_per lengths differ");
  }
  check_array(state.f, "f", true);
  check_array(state.psi, "psi", true);
  check_array(state.phi_per, "phi_per", false);
}

int HomogeneousState::dimension() const {
  int n = 0;
  for (const auto& fac : factors) n += fac.dimension;
  return n;
}

void validate(const HomogeneousState& state) {
  if (state.factors.empty()) {
    throw std::invalid_argument("homogeneous state: no factors");
  }
  if (!(state.alpha >= 0.0) || !std::isfinite(state.alpha)) {
    throw std::invalid_argument("homogeneous state: alpha must be >= 0");
  }
  int sloped = 0;
  for (std::size_t k = 0; k < state.factors.size(); ++k) {
    const auto& fac = state.factors[k];
    const std::string where = "homogeneous state: factor " + std::to_string(k);
    if (!std::isfinite(fac.coefficient) || !(fac.coefficient > 0.0)) {
      throw std::invalid_argument(where + " coefficient must be positive");
    }
    if (!std::isfinite(fac.slope)) {
      throw std::invalid_argument(where + " slope is not finite");
    }
    if (fac.kind == FactorKind::flat_circle && fac.dimension != 1) {
      throw std::invalid_argument(where + " flat circle must have dimension 1");
    }
    if (fac.kind == FactorKind::round_sphere && fac.dimension < 2) {
      throw std::invalid_argument(where + " round sphere needs dimension >= 2");
    }
    if (fac.slope != 0.0) {
      if (fac.kind != FactorKind::flat_circle) {
        throw std::invalid_argument(where + " map slope on a non-flat factor");
      }
      ++sloped;
    }
  }
  // dphi (x) dphi would otherwise have off-diagonal terms.
  if (sloped > 1) {
    throw std::invalid_argument(
        "homogeneous state: at most one factor may carry a map slope");
  }
  if (state.dimension() < 2) {
    throw std::invalid_argument("homogeneous state: dimension must be >= 2");
  }
}

void CurvatureFields::resize(std::size_t m) {
  for (auto* v : {&K_rad, &K_fib, &ric_rad, &ric_fib, &R, &ric_sq, &rm_sq,
                  &weyl_sq, &grad_phi_sq, &lap_phi, &S, &s_tensor_sq, &psi_s,
                  &phi_s}) {
    v->assign(m, 0.0);
  }
}

SectionalNorms sectional_norms(int n, double K_rad, double K_fib) {
  const double k = n - 1;
  SectionalNorms out{};
  out.ric_rad = k * K_rad;
  out.ric_fib = K_rad + (n - 2) * K_fib;
  out.R = 2.0 * k * K_rad + k * (n - 2) * K_fib;
  out.ric_sq = out.ric_rad * out.ric_rad + k * out.ric_fib * out.ric_fib;
  out.rm_sq = 4.0 * k * K_rad * K_rad + 2.0 * k * (n - 2) * K_fib * K_fib;
  if (n >= 4) {
    const double w = out.rm_sq - 4.0 / (n - 2) * out.ric_sq +
                     2.0 / (k * (n - 2)) * out.R * out.R;
    out.weyl_sq = std::max(w, 0.0);
  } else {
    out.weyl_sq = 0.0;
  }
  return out;
}

CurvatureFields compute_curvature(const WarpedState& state) {
  return compute_curvature(state, state.alpha);
}

CurvatureFields compute_curvature(const WarpedState& state, double coupling) {
  validate(state);
  CurvatureFields out;
  kernels::curvature(kernels::view_of(state, coupling), out,
                     kernels::choose(state.size()));
  return out;
}

CurvatureFields compute_curvature_homogeneous(const HomogeneousState& state) {
  validate(state);
  const int n = state.dimension();
  double R = 0.0, ric_sq = 0.0, rm_sq = 0.0, grad_sq = 0.0;
  double s_sq = 0.0;
  for (const auto& fac : state.factors) {
    if (fac.kind == FactorKind::round_sphere) {
      const double k = fac.dimension;
      const double ric = (k - 1.0) / fac.coefficient;
      R += k * ric;
      ric_sq += k * ric * ric;
      s_sq += k * ric * ric;
      rm_sq += 2.0 * k * (k - 1.0) / (fac.coefficient * fac.coefficient);
    } else if (fac.slope != 0.0) {
      const double g = fac.slope * fac.slope / fac.coefficient;
      grad_sq += g;
      s_sq += state.alpha * state.alpha * g * g;
    }
  }
  double weyl_sq = 0.0;
  if (n >= 4) {
    weyl_sq = std::max(0.0, rm_sq - 4.0 / (n - 2) * ric_sq +
                                2.0 / ((n - 1.0) * (n - 2)) * R * R);
  }
  CurvatureFields out;
  out.n = n;
  out.resize(1);
  // K_rad/K_fib/psi_s are warped-frame quantities; left at zero for products.
  double ric_max = 0.0;
  for (const auto& fac : state.factors) {
    if (fac.kind == FactorKind::round_sphere) {
      ric_max = std::max(ric_max, (fac.dimension - 1.0) / fac.coefficient);
    }
  }
  out.ric_rad[0] = ric_max;
  out.ric_fib[0] = ric_max;
  out.R[0] = R;
  out.ric_sq[0] = ric_sq;
  out.rm_sq[0] = rm_sq;
  out.weyl_sq[0] = weyl_sq;
  out.grad_phi_sq[0] = grad_sq;
  out.lap_phi[0] = 0.0;
  out.S[0] = R - state.alpha * grad_sq;
  out.s_tensor_sq[0] = s_sq;
  out.phi_s[0] = std::sqrt(grad_sq);
  return out;
}

double unit_sphere_volume(int k) {
  // |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2)
  const double a = 0.5 * (k + 1);
  return 2.0 * std::pow(M_PI, a) / std::tgamma(a);
}

double unit_ball_volume(int k) {
  const double a = 0.5 * k;
  return std::pow(M_PI, a) / std::tgamma(a + 1.0);
}

double fiber_volume(FiberKind kind, int n) {
  const int k = n - 1;
  if (kind == FiberKind::round_sphere) return unit_sphere_volume(k);
  return std::pow(kTwoPi, k);
}

LengthVolume reduced_lengths_and_volume(const WarpedState& state) {
  validate(state);
  // Trapezoidal rule on a periodic grid reduces to h * sum.
  const double h = kTwoPi / static_cast<double>(state.size());
  double len = 0.0, vol = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    len += state.f[i];
    vol += state.f[i] * std::pow(state.psi[i], state.n - 1);
  }
  return LengthVolume{h * len, fiber_volume(state.fiber, state.n) * h * vol};
}

double homogeneous_volume(const HomogeneousState& state) {
  double vol = 1.0;
  for (const auto& fac : state.factors) {
    vol *= unit_sphere_volume(fac.dimension) *
           std::pow(fac.coefficient, 0.5 * fac.dimension);
  }
  return vol;
}

WarpedState scale(const WarpedState& state, double Q) {
  if (!(Q > 0.0) || !std::isfinite(Q)) {
    throw std::invalid_argument("scale factor must be positive");
  }
  const double r = std::sqrt(Q);
  WarpedState out = state;
  for (auto& v : out.f) v *= r;
  for (auto& v : out.psi) v *= r;
  out.t = state.t * Q;
  return out;
}

HomogeneousState scale(const HomogeneousState& state, double Q) {
  if (!(Q > 0.0) || !std::isfinite(Q)) {
    throw std::invalid_argument("scale factor must be positive");
  }
  HomogeneousState out = state;
  for (auto& fac : out.factors) fac.coefficient *= Q;
  out.t = state.t * Q;
  return out;
}

WarpedState to_warped(const HomogeneousState& state, std::size_t m) {
  validate(state);
  const auto& fs = state.factors;
  if (fs.front().kind != FactorKind::flat_circle) {
    throw std::invalid_argument("to_warped: first factor must be a circle");
  }
  WarpedState out;
  out.n = state.dimension();
  out.alpha = state.alpha;
  out.t = state.t;
  const double slope = fs.front().slope;
  out.winding = std::lround(slope);
  if (static_cast<double>(out.winding) != slope) {
    throw std::invalid_argument("to_warped: circle slope must be an integer");
  }
  double psi = 1.0;
  if (fs.size() == 1) {
    out.fiber = FiberKind::flat_torus;
  } else if (fs.size() == 2 && fs[1].kind == FactorKind::round_sphere) {
    out.fiber = FiberKind::round_sphere;
    psi = std::sqrt(fs[1].coefficient);
  } else {
    out.fiber = FiberKind::flat_torus;
    psi = std::sqrt(fs[1].coefficient);
    for (std::size_t k = 1; k < fs.size(); ++k) {
      if (fs[k].kind != FactorKind::flat_circle ||
          fs[k].coefficient != fs[1].coefficient || fs[k].slope != 0.0) {
        throw std::invalid_argument(
            "to_warped: fiber circles must share one coefficient and carry no "
            "slope");
      }
    }
  }
  (void)GridGeometry::periodic(m);
  out.f.assign(m, std::sqrt(fs.front().coefficient));
  out.psi.assign(m, psi);
  out.phi_per.assign(m, 0.0);
  return out;
}

double max_of(std::span<const double> v) {
  double r = -std::numeric_limits<double>::infinity();
  for (double x : v) r = std::max(r, x);
  return r;
}

double min_of(std::span<const double> v) {
  double r = std::numeric_limits<double>::infinity();
  for (double x : v) r = std::min(r, x);
  return r;
}

}  // namespace rhflow

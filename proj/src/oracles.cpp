#include "rhflow/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace rhflow {

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::flat_stationary: return "flat_stationary";
    case ScenarioId::torus_list: return "torus_list";
    case ScenarioId::shrinking_sphere: return "shrinking_sphere";
    case ScenarioId::shrinking_cylinder: return "shrinking_cylinder";
    case ScenarioId::perturbed_cylinder: return "perturbed_cylinder";
    case ScenarioId::perturbed_torus: return "perturbed_torus";
  }
  return "unknown";
}

ScenarioId scenario_from_string(const std::string& name) {
  for (ScenarioId id : all_scenarios()) {
    if (to_string(id) == name) return id;
  }
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

const std::vector<ScenarioId>& all_scenarios() {
  static const std::vector<ScenarioId> ids = {
      ScenarioId::flat_stationary,    ScenarioId::torus_list,
      ScenarioId::shrinking_sphere,   ScenarioId::shrinking_cylinder,
      ScenarioId::perturbed_cylinder, ScenarioId::perturbed_torus};
  return ids;
}

FiberKind Scenario::fiber() const {
  switch (id) {
    case ScenarioId::shrinking_cylinder:
    case ScenarioId::perturbed_cylinder:
      return FiberKind::round_sphere;
    default:
      return FiberKind::flat_torus;
  }
}

void Scenario::validate() const {
  if (n < 2) throw std::invalid_argument("scenario: n must be >= 2");
  if (fiber() == FiberKind::round_sphere && n < 3) {
    throw std::invalid_argument("scenario: cylinder needs n >= 3");
  }
  if (!(alpha >= 0.0)) throw std::invalid_argument("scenario: alpha must be >= 0");
  if (!(a0 > 0.0)) throw std::invalid_argument("scenario: a0 must be positive");
  if (!(psi0 > 0.0)) throw std::invalid_argument("scenario: psi0 must be positive");
  if (!(std::abs(psi_amp) < 1.0)) {
    throw std::invalid_argument("scenario: |psi_amp| must be < 1");
  }
  if (!homogeneous()) (void)GridGeometry::periodic(m);
}

Scenario default_scenario(ScenarioId id) {
  Scenario s;
  s.id = id;
  switch (id) {
    case ScenarioId::flat_stationary:
      s.n = 3;
      s.m = 32;
      break;
    case ScenarioId::torus_list:
      s.n = 2;
      s.alpha = 1.0;
      s.winding = 1;
      s.m = 16;
      break;
    case ScenarioId::shrinking_sphere:
      s.n = 3;
      break;
    case ScenarioId::shrinking_cylinder:
      s.n = 4;
      s.m = 16;
      break;
    case ScenarioId::perturbed_cylinder:
      s.n = 4;
      s.alpha = 1.0;
      s.psi_amp = 0.05;
      s.phi_amp = 0.1;
      s.m = 64;
      break;
    case ScenarioId::perturbed_torus:
      s.n = 2;
      s.alpha = 1.0;
      s.winding = 1;
      s.phi_amp = 0.1;
      s.m = 64;
      break;
  }
  return s;
}

WarpedState initial_warped(const Scenario& s) {
  s.validate();
  if (s.homogeneous()) {
    throw std::invalid_argument("scenario " + to_string(s.id) +
                                " has no warped representation");
  }
  const GridGeometry grid = GridGeometry::periodic(s.m);
  WarpedState w;
  w.n = s.n;
  w.fiber = s.fiber();
  w.alpha = s.alpha;
  w.winding = s.winding;
  w.f.assign(s.m, std::sqrt(s.a0));
  w.psi.assign(s.m, s.psi0);
  w.phi_per.assign(s.m, 0.0);
  for (std::size_t i = 0; i < s.m; ++i) {
    const double sx = std::sin(grid.x(i));
    w.psi[i] = s.psi0 * (1.0 + s.psi_amp * sx);
    w.phi_per[i] = s.phi_amp * sx;
  }
  return w;
}

HomogeneousState initial_homogeneous(const Scenario& s) {
  s.validate();
  HomogeneousState h;
  h.alpha = s.alpha;
  switch (s.id) {
    case ScenarioId::shrinking_sphere:
      h.factors.push_back({s.a0, FactorKind::round_sphere, s.n, 0.0});
      break;
    case ScenarioId::torus_list:
    case ScenarioId::flat_stationary:
      h.factors.push_back({s.a0, FactorKind::flat_circle, 1,
                           static_cast<double>(s.winding)});
      for (int k = 1; k < s.n; ++k) {
        h.factors.push_back({s.psi0 * s.psi0, FactorKind::flat_circle, 1, 0.0});
      }
      break;
    case ScenarioId::shrinking_cylinder:
      h.factors.push_back({s.a0, FactorKind::flat_circle, 1,
                           static_cast<double>(s.winding)});
      h.factors.push_back({s.psi0 * s.psi0, FactorKind::round_sphere, s.n - 1, 0.0});
      break;
    default:
      throw std::invalid_argument("scenario " + to_string(s.id) +
                                  " is not homogeneous");
  }
  return h;
}

std::optional<double> singular_time(const Scenario& s) {
  switch (s.id) {
    case ScenarioId::shrinking_sphere:
      return s.a0 / (2.0 * (s.n - 1));
    case ScenarioId::shrinking_cylinder:
      return s.psi0 * s.psi0 / (2.0 * (s.n - 2));
    default:
      return std::nullopt;
  }
}

ExactState exact_state(const Scenario& s, double t) {
  s.validate();
  if (auto ts = singular_time(s); ts && !(t < *ts)) {
    throw std::domain_error("exact_state: t is at or past the singular time");
  }
  switch (s.id) {
    case ScenarioId::flat_stationary: {
      WarpedState w = initial_warped(s);
      w.t = t;
      return w;
    }
    case ScenarioId::torus_list: {
      WarpedState w = initial_warped(s);
      const double wn = static_cast<double>(s.winding);
      const double a = s.a0 + s.alpha * wn * wn * t;
      w.f.assign(s.m, std::sqrt(a));
      w.t = t;
      return w;
    }
    case ScenarioId::shrinking_sphere: {
      HomogeneousState h = initial_homogeneous(s);
      h.factors[0].coefficient = s.a0 - 2.0 * (s.n - 1) * t;
      h.t = t;
      return h;
    }
    case ScenarioId::shrinking_cylinder: {
      WarpedState w = initial_warped(s);
      w.psi.assign(s.m, std::sqrt(s.psi0 * s.psi0 - 2.0 * (s.n - 2) * t));
      w.t = t;
      return w;
    }
    case ScenarioId::perturbed_cylinder:
    case ScenarioId::perturbed_torus:
      if (t != 0.0) {
        throw std::domain_error("exact_state: " + to_string(s.id) +
                                " has no closed form for t > 0");
      }
      return initial_warped(s);
  }
  throw std::logic_error("unreachable");
}

}  // namespace rhflow

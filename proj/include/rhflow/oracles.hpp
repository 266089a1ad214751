#pragma once

// Reference scenarios with closed-form solutions where they exist.
//
//   torus_list          a(t) = a0 + alpha w^2 t on the circle factor
//   shrinking_sphere    g(t) = (1 - 2(n-1)t/a0) g(0)
//   shrinking_cylinder  psi^2(t) = psi0^2 - 2(n-2)t, f fixed
//
// The perturbed scenarios are defined by their initial data only.

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rhflow/geometry.hpp"

namespace rhflow {

enum class ScenarioId {
  flat_stationary,
  torus_list,
  shrinking_sphere,
  shrinking_cylinder,
  perturbed_cylinder,
  perturbed_torus
};

std::string to_string(ScenarioId id);
ScenarioId scenario_from_string(const std::string& name);
const std::vector<ScenarioId>& all_scenarios();

struct Scenario {
  ScenarioId id = ScenarioId::flat_stationary;
  int n = 2;
  double alpha = 0.0;
  double a0 = 1.0;        // coefficient of the circle (or sphere) factor
  double psi0 = 1.0;      // fiber radius
  double psi_amp = 0.0;   // psi = psi0 (1 + psi_amp sin x)
  double phi_amp = 0.0;   // u = phi_amp sin x
  long winding = 0;
  std::size_t m = 32;

  bool homogeneous() const { return id == ScenarioId::shrinking_sphere; }
  FiberKind fiber() const;
  void validate() const;
};

/// Parameters used by the default verification suite.
Scenario default_scenario(ScenarioId id);

WarpedState initial_warped(const Scenario& s);
HomogeneousState initial_homogeneous(const Scenario& s);

using ExactState = std::variant<WarpedState, HomogeneousState>;

/// Closed-form state at time t. Throws std::domain_error at or past the
/// singular time, and for perturbed scenarios when t != 0.
ExactState exact_state(const Scenario& s, double t);

std::optional<double> singular_time(const Scenario& s);

}  // namespace rhflow

#include <doctest.h>

#include <cmath>
#include <variant>

#include "rhflow/flow.hpp"
#include "rhflow/oracles.hpp"
#include "support.hpp"

using namespace rhflow;

TEST_SUITE("oracles") {

TEST_CASE("scenario names round trip") {
  for (auto id : all_scenarios()) CHECK(scenario_from_string(to_string(id)) == id);
  CHECK_THROWS_AS(scenario_from_string("moebius"), std::invalid_argument);
}

TEST_CASE("torus coefficient a = a0 + t") {
  const auto s = default_scenario(ScenarioId::torus_list);
  const auto st = std::get<WarpedState>(exact_state(s, 1.0));
  for (double f : st.f) CHECK(f * f == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(st.t == 1.0);
}

TEST_CASE("sphere coefficient 1 - 4t") {
  const auto s = default_scenario(ScenarioId::shrinking_sphere);
  const auto st = std::get<HomogeneousState>(exact_state(s, 0.125));
  CHECK(st.factors.at(0).coefficient == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(exact_state(s, 0.25), std::domain_error);
  CHECK_THROWS_AS(exact_state(s, 0.3), std::domain_error);
}

TEST_CASE("singular times") {
  CHECK(singular_time(default_scenario(ScenarioId::shrinking_cylinder)).value() ==
        doctest::Approx(0.25));
  CHECK(singular_time(default_scenario(ScenarioId::shrinking_sphere)).value() ==
        doctest::Approx(0.25));
  CHECK_FALSE(singular_time(default_scenario(ScenarioId::flat_stationary)));
  CHECK_FALSE(singular_time(default_scenario(ScenarioId::torus_list)));
}

TEST_CASE("t = 0 reproduces the initial data") {
  for (auto id : all_scenarios()) {
    const auto s = default_scenario(id);
    const auto ex = exact_state(s, 0.0);
    if (s.homogeneous()) {
      const auto h0 = initial_homogeneous(s);
      const auto& h = std::get<HomogeneousState>(ex);
      REQUIRE(h.factors.size() == h0.factors.size());
      for (std::size_t j = 0; j < h.factors.size(); ++j) {
        CHECK(h.factors[j].coefficient == h0.factors[j].coefficient);
      }
    } else {
      const auto w0 = initial_warped(s);
      const auto& w = std::get<WarpedState>(ex);
      CHECK(w.f == w0.f);
      CHECK(w.psi == w0.psi);
      CHECK(w.phi_per == w0.phi_per);
    }
  }
  CHECK_THROWS_AS(exact_state(default_scenario(ScenarioId::perturbed_cylinder), 0.1),
                  std::domain_error);
}

TEST_CASE("exact solutions satisfy the flow equations") {
  // Fourth-order central difference in time against rhs().
  for (auto id : {ScenarioId::torus_list, ScenarioId::shrinking_cylinder,
                  ScenarioId::flat_stationary}) {
    const auto s = default_scenario(id);
    for (double t : {0.0 + 0.01, 0.05, 0.15}) {
      // The stencil error d^4 psi^(5)/30 stays near 1e-12 up to t = 0.15.
      const double d = 1e-4;
      auto at = [&](double tt) { return std::get<WarpedState>(exact_state(s, tt)); };
      const auto m2 = at(t - 2 * d), m1 = at(t - d), p1 = at(t + d), p2 = at(t + 2 * d);
      const auto r = rhs(at(t));
      for (std::size_t i = 0; i < r.f_t.size(); ++i) {
        const double ft = (m2.f[i] - 8 * m1.f[i] + 8 * p1.f[i] - p2.f[i]) / (12 * d);
        const double pt = (m2.psi[i] - 8 * m1.psi[i] + 8 * p1.psi[i] - p2.psi[i]) / (12 * d);
        CHECK(std::abs(ft - r.f_t[i]) <= 1e-10);
        CHECK(std::abs(pt - r.psi_t[i]) <= 1e-10);
      }
    }
  }
  const auto s = default_scenario(ScenarioId::shrinking_sphere);
  const auto rate = rhs_homogeneous(std::get<HomogeneousState>(exact_state(s, 0.1)));
  const double d = 1e-4;
  const double a1 = std::get<HomogeneousState>(exact_state(s, 0.1 + d)).factors[0].coefficient;
  const double a0 = std::get<HomogeneousState>(exact_state(s, 0.1 - d)).factors[0].coefficient;
  CHECK(std::abs((a1 - a0) / (2 * d) - rate[0]) <= 1e-10);
}

TEST_CASE("S along the torus is -alpha w^2 / a and increasing") {
  auto s = default_scenario(ScenarioId::torus_list);
  s.winding = 2;
  s.alpha = 0.5;
  double prev = -1e300;
  for (double t : {0.0, 0.5, 1.0, 2.0}) {
    const auto st = std::get<WarpedState>(exact_state(s, t));
    const double a = st.f[0] * st.f[0];
    CHECK(a == doctest::Approx(1.0 + 0.5 * 4 * t));
    const double S = compute_curvature(st).S[0];
    CHECK(S == doctest::Approx(-0.5 * 4 / a));
    CHECK(S > prev);
    prev = S;
  }
}

TEST_CASE("scenario validation") {
  auto s = default_scenario(ScenarioId::perturbed_cylinder);
  s.psi_amp = 1.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = default_scenario(ScenarioId::shrinking_cylinder);
  s.n = 2;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

}  // TEST_SUITE

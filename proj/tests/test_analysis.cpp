#include <doctest.h>

#include <cmath>

#include "rhflow/analysis.hpp"
#include "rhflow/oracles.hpp"
#include "support.hpp"

using namespace rhflow;
using rhtest::make_state;

namespace {

Trajectory run_scenario(ScenarioId id, double t_end, double dt_max = 0.0) {
  const Scenario s = default_scenario(id);
  FlowConfig fc;
  fc.t_end = t_end;
  fc.dt_max = dt_max;
  return run(fc, initial_warped(s));
}

WarpedState flat(std::size_t m = 16) {
  return make_state(3, FiberKind::flat_torus, m, rhtest::constant_one,
                    rhtest::constant_one);
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("S-evolution residual vanishes on flat data") {
  FlowConfig fc;
  fc.t_end = 0.1;
  const auto traj = run(fc, flat());
  CHECK(monitor_S_evolution(traj, 1, 0.0) == 0.0);
}

TEST_CASE("S-evolution on the torus matches the closed form") {
  const auto traj = run_scenario(ScenarioId::torus_list, 1.0, 1e-3);
  const std::size_t mid = traj.entries.size() / 2;
  CHECK(monitor_S_evolution(traj, mid, identity_coupling(1.0)) <= 1e-6);
  // With the S-tensor built from coupling alpha the identity is off by
  // alpha^2 / a^2 on this solution.
  const double a = 1.0 + traj.entries[mid].state.t;
  CHECK(monitor_S_evolution(traj, mid, 1.0) == doctest::Approx(1.0 / (a * a)).epsilon(1e-4));
}

TEST_CASE("S-evolution needs neighbours on both sides") {
  const auto traj = run_scenario(ScenarioId::torus_list, 0.01, 1e-3);
  CHECK_THROWS_AS(monitor_S_evolution(traj, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(monitor_S_evolution(traj, traj.entries.size() - 1, 0.5),
                  std::invalid_argument);
}

TEST_CASE("minimum of S never decreases on the reference scenarios") {
  for (auto id : {ScenarioId::torus_list, ScenarioId::shrinking_cylinder,
                  ScenarioId::flat_stationary}) {
    const auto traj = run_scenario(id, 0.2);
    const auto recs = traj.records();
    CHECK(check_min_S_monotone(recs).worst_drop == 0.0);
  }
}

TEST_CASE("gradient estimate") {
  SUBCASE("torus: equality at t = 0") {
    const auto traj = run_scenario(ScenarioId::torus_list, 0.5, 1e-3);
    const auto recs = traj.records();
    const double margin = check_gradient_bound(recs, 1.0, 1e-8);
    CHECK(margin >= 0.0);
    CHECK(margin <= 1e-8 + 1e-15);
  }
  SUBCASE("constant map") {
    const auto traj = run_scenario(ScenarioId::shrinking_cylinder, 0.1);
    const auto recs = traj.records();
    CHECK(check_gradient_bound(recs, 1.0, 1e-8) >= 0.0);
  }
  SUBCASE("perturbed torus") {
    const auto traj = run_scenario(ScenarioId::perturbed_torus, 0.5);
    const auto recs = traj.records();
    CHECK(check_gradient_bound(recs, 1.0, 1e-8) >= 0.0);
  }
}

TEST_CASE("map maximum principle on a flat background") {
  const auto s0 = make_state(2, FiberKind::flat_torus, 64, rhtest::constant_one,
                             rhtest::constant_one, [](double x) { return std::sin(x); });
  FlowConfig fc;
  fc.t_end = 0.5;
  const auto traj = run(fc, s0);
  const auto recs = traj.records();
  const auto mp = check_phi_max_principle(recs);
  CHECK(mp.applicable);
  CHECK(mp.violation == 0.0);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    CHECK(recs[k].phi_max - recs[k].phi_min <= recs[k - 1].phi_max - recs[k - 1].phi_min);
  }
  // Heat equation: amplitude decays as e^{-t}.
  CHECK(recs.back().phi_max == doctest::Approx(std::exp(-0.5)).epsilon(1e-3));
}

TEST_CASE("maximum principle is skipped for circle-valued maps") {
  const auto traj = run_scenario(ScenarioId::torus_list, 0.01, 1e-3);
  const auto recs = traj.records();
  CHECK_FALSE(check_phi_max_principle(recs).applicable);
}

TEST_CASE("metric distortion") {
  SUBCASE("t = t0") {
    const auto traj = run_scenario(ScenarioId::torus_list, 0.1, 1e-3);
    CHECK(check_metric_distortion(traj, 3, 3).worst() == 0.0);
  }
  SUBCASE("torus") {
    const auto traj = run_scenario(ScenarioId::torus_list, 1.0, 1e-3);
    const auto d = check_metric_distortion(traj);
    CHECK(d.worst() <= 1e-8);
    CHECK(d.c_meas == doctest::Approx(2.0));
  }
  SUBCASE("cylinder: radial direction is unchanged") {
    const auto traj = run_scenario(ScenarioId::shrinking_cylinder, 0.2);
    for (const auto& e : traj.entries) {
      for (double f : e.state.f) CHECK(f == 1.0);
    }
    CHECK(check_metric_distortion(traj).worst() <= 1e-8);
  }
  SUBCASE("bad window") {
    const auto traj = run_scenario(ScenarioId::torus_list, 0.01, 1e-3);
    CHECK_THROWS_AS(check_metric_distortion(traj, 2, 1), std::invalid_argument);
  }
}

TEST_CASE("volume identity converges at second order in dt") {
  for (auto id : {ScenarioId::shrinking_cylinder, ScenarioId::torus_list}) {
    double r[3];
    for (int k = 0; k < 3; ++k) {
      const auto traj = run_scenario(id, 0.2, 4e-3 / std::pow(2.0, k));
      const auto v = check_volume_evolution(traj);
      r[k] = v.derivative_residual;
      CHECK(v.lower_bound_margin >= -1e-8);
    }
    CHECK(std::log2(r[0] / r[1]) >= 1.9);
    CHECK(std::log2(r[1] / r[2]) >= 1.9);
  }
}

TEST_CASE("volume on flat data is constant") {
  FlowConfig fc;
  fc.t_end = 0.1;
  const auto v = check_volume_evolution(run(fc, flat()));
  CHECK(v.derivative_residual == 0.0);
  CHECK(v.lower_bound_margin == 0.0);
}

TEST_CASE("on the torus the volume rate differs from the integral of -S") {
  const auto s = initial_warped(default_scenario(ScenarioId::torus_list));
  const auto c = compute_curvature(s);
  const double V = reduced_lengths_and_volume(s).volume;
  double minus_S = 0.0;
  for (double v : c.S) minus_S -= v;
  minus_S *= V / static_cast<double>(c.size());
  const double rate = curvature_integrals(s, c).dvdt;
  CHECK(rate == doctest::Approx(0.5 * V));      // V alpha / (2a)
  CHECK(minus_S == doctest::Approx(V));         // V alpha / a
}

TEST_CASE("blow-up point picker") {
  CHECK_THROWS_AS(pick_blowup_points(Trajectory{}, 0.5), std::invalid_argument);
  {
    FlowConfig fc;
    fc.t_end = 0.1;
    CHECK(pick_blowup_points(run(fc, flat()), 1.0).empty());
  }
  FlowConfig fc;
  const auto traj = run(fc, initial_warped(default_scenario(ScenarioId::shrinking_cylinder)));
  const auto pts = pick_blowup_points(traj, 1.5);
  REQUIRE(pts.size() > 10);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    CHECK(pts[k].Q >= pts[k].running_max / 1.5);
    if (k > 0) CHECK(pts[k].Q >= pts[k - 1].Q);
    // |Rm| = 2 sqrt(3) / psi^2 on the round cylinder.
    const double psi = traj.entries[pts[k].entry].state.psi[0];
    CHECK(pts[k].Q == doctest::Approx(2.0 * std::sqrt(3.0) / (psi * psi)));
  }
}

TEST_CASE("parabolic rescaling") {
  SUBCASE("Q = 1 is the identity") {
    const auto s = initial_warped(default_scenario(ScenarioId::perturbed_torus));
    const auto r = parabolic_rescale(s, 1.0);
    CHECK(r.rescaled.f == s.f);
    CHECK(r.rescaled.psi == s.psi);
    CHECK(r.rescaled.phi_per == s.phi_per);
  }
  SUBCASE("cylinder rescaled to unit curvature") {
    FlowConfig fc;
    fc.t_end = 0.2;
    const auto traj =
        run(fc, initial_warped(default_scenario(ScenarioId::shrinking_cylinder)));
    const auto& s = traj.final_state();
    const double M = std::sqrt(max_of(compute_curvature(s).rm_sq));
    const auto r = parabolic_rescale(s, M);
    CHECK(std::abs(std::sqrt(max_of(compute_curvature(r.rescaled).rm_sq)) - 1.0) <= 1e-12);
    CHECK(r.scaling_error <= 1e-12);
    CHECK(r.rescaled.t == 0.0);
  }
  SUBCASE("torus S scales by 1/Q") {
    const auto s = initial_warped(default_scenario(ScenarioId::torus_list));
    const double s_min = min_of(compute_curvature(s).S);
    const auto r = parabolic_rescale(s, 10.0);
    CHECK(rhtest::rel(min_of(compute_curvature(r.rescaled).S), s_min / 10.0) <= 1e-12);
  }
}

TEST_CASE("ball volume expansion") {
  std::vector<double> radii;
  for (int i = 0; i <= 15; ++i) radii.push_back(0.05 + 0.01 * i);
  SUBCASE("flat") {
    HomogeneousState h;
    h.factors.assign(3, ProductFactor{1.0, FactorKind::flat_circle, 1, 0.0});
    const auto fit = ball_volume_expansion_fit(h, radii);
    CHECK(fit.c == 0.0);
    CHECK(fit.min_ratio == 1.0);
    CHECK(fit.omega_n == doctest::Approx(4.0 * M_PI / 3.0));
  }
  SUBCASE("unit S^3") {
    HomogeneousState h;
    h.factors = {ProductFactor{1.0, FactorKind::round_sphere, 3, 0.0}};
    for (double r : {0.05, 0.1, 0.5, 1.0}) {
      CHECK(ball_volume(h, r) == doctest::Approx(M_PI * (2 * r - std::sin(2 * r))).epsilon(1e-12));
    }
    const auto fit = ball_volume_expansion_fit(h, radii);
    CHECK(rhtest::rel(fit.c, 0.2) <= 0.02);
    CHECK(fit.predicted == doctest::Approx(0.2));
  }
  SUBCASE("scaled sphere") {
    HomogeneousState h;
    h.factors = {ProductFactor{1.0, FactorKind::round_sphere, 3, 0.0}};
    const double c1 = ball_volume_expansion_fit(h, radii).c;
    std::vector<double> scaled;
    for (double r : radii) scaled.push_back(2.0 * r);
    const double c4 = ball_volume_expansion_fit(scale(h, 4.0), scaled).c;
    CHECK(c4 == doctest::Approx(c1 / 4.0).epsilon(1e-10));
  }
  SUBCASE("S^1 x S^2 uses the product ball") {
    HomogeneousState h;
    h.factors = {ProductFactor{1.0, FactorKind::flat_circle, 1, 0.0},
                 ProductFactor{1.0, FactorKind::round_sphere, 2, 0.0}};
    const auto fit = ball_volume_expansion_fit(h, radii);
    // R = 2, n = 3: R / (6 (n + 2)) = 1/15.
    CHECK(fit.predicted == doctest::Approx(1.0 / 15.0));
    CHECK(rhtest::rel(fit.c, 1.0 / 15.0) <= 0.02);
  }
}

TEST_CASE("spacetime norms") {
  SUBCASE("flat") {
    FlowConfig fc;
    fc.t_end = 0.1;
    const auto n = spacetime_norms(run(fc, flat()));
    CHECK(n.R_raw == 0.0);
    CHECK(n.W_raw == 0.0);
  }
  SUBCASE("torus has no Weyl part") {
    const auto n = spacetime_norms(run_scenario(ScenarioId::perturbed_torus, 0.1));
    CHECK(n.W_raw == 0.0);
  }
  SUBCASE("cylinder closed form") {
    const auto traj = run_scenario(ScenarioId::shrinking_cylinder, 0.2);
    const auto n = spacetime_norms(traj);
    const double want = 216.0 * 2 * M_PI * M_PI * kTwoPi * 0.5 *
                        (1.0 / std::sqrt(1.0 - 0.8) - 1.0);
    CHECK(rhtest::rel(n.R_raw, want) <= 0.01);
    CHECK(n.R_norm == doctest::Approx(std::pow(n.R_raw, 1.0 / 3.0)));
    CHECK(traj.entries.back().record.norm_R_raw == doctest::Approx(n.R_raw).epsilon(1e-12));
  }
}

TEST_CASE("curvature ratio diagnostic") {
  SUBCASE("flat") {
    FlowConfig fc;
    fc.t_end = 0.1;
    const auto recs = run(fc, flat()).records();
    const auto series = curvature_ratio_diagnostic(recs);
    for (const auto& s : series) CHECK(s.ratio == 0.0);
    CHECK(ratio_spread(series) == 1.0);
  }
  SUBCASE("cylinder") {
    FlowConfig fc;
    const auto recs =
        run(fc, initial_warped(default_scenario(ScenarioId::shrinking_cylinder))).records();
    CHECK(recs.back().max_ric / recs.front().max_ric >= 100.0);
    const auto series = curvature_ratio_diagnostic(recs);
    CHECK(ratio_spread(series) <= 2.0);
    CHECK(series.front().ratio == doctest::Approx(2 * std::sqrt(3.0) / 3.0));
  }
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rhflow/curvature_oracle.hpp"
#include "rhflow/geometry.hpp"
#include "support.hpp"

using namespace rhflow;
using rhtest::make_state;

TEST_SUITE("geometry") {

TEST_CASE("grid requires at least eight points") {
  CHECK_THROWS_AS(GridGeometry::periodic(7), std::invalid_argument);
  const auto g = GridGeometry::periodic(64);
  CHECK(std::abs(g.h * 64 - kTwoPi) < 1e-15);
}

TEST_CASE("flat state has no curvature") {
  for (int n : {2, 3, 4, 5}) {
    const auto s = make_state(n, FiberKind::flat_torus, 16, rhtest::constant_one,
                              rhtest::constant_one);
    const auto c = compute_curvature(s);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c.R[i] == 0.0);
      CHECK(c.rm_sq[i] == 0.0);
      CHECK(c.ric_sq[i] == 0.0);
      CHECK(c.S[i] == 0.0);
      CHECK(c.weyl_sq[i] == 0.0);
    }
  }
}

TEST_CASE("round cylinder with radius 2 in dimension 4") {
  const auto s = make_state(4, FiberKind::round_sphere, 16, rhtest::constant_one,
                            [](double) { return 2.0; });
  const auto c = compute_curvature(s);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c.K_rad[i] == doctest::Approx(0.0));
    CHECK(c.K_fib[i] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(c.R[i] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(c.rm_sq[i] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(c.ric_sq[i] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(c.S[i] == doctest::Approx(1.5).epsilon(1e-15));
  }
}

TEST_CASE("S equals R minus alpha |grad phi|^2 pointwise") {
  const auto s = make_state(
      4, FiberKind::round_sphere, 64, [](double x) { return 1.0 + 0.1 * std::cos(x); },
      [](double x) { return 1.5 + 0.2 * std::sin(x); },
      [](double x) { return 0.3 * std::sin(2 * x); }, 1, 0.7);
  const auto c = compute_curvature(s);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double want = c.R[i] - 0.7 * c.grad_phi_sq[i];
    CHECK(std::abs(c.S[i] - want) <= 1e-14 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("curvature scales as 1/Q and squared norms as 1/Q^2") {
  const auto s = make_state(
      4, FiberKind::round_sphere, 64, [](double x) { return 1.0 + 0.1 * std::cos(x); },
      [](double x) { return 1.5 + 0.2 * std::sin(x); },
      [](double x) { return 0.3 * std::sin(x); }, 0, 1.0);
  const auto c = compute_curvature(s);
  // K_rad changes sign on this profile, so errors are relative to the field's max.
  auto close = [](const std::vector<double>& got, double factor, const std::vector<double>& want) {
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      scale = std::max(scale, std::abs(want[i]));
      err = std::max(err, std::abs(got[i] * factor - want[i]));
    }
    return err <= 1e-12 * scale;
  };
  for (double Q : {0.5, 1.0, 4.0}) {
    const auto cq = compute_curvature(scale(s, Q));
    CHECK(close(cq.R, Q, c.R));
    CHECK(close(cq.K_rad, Q, c.K_rad));
    CHECK(close(cq.K_fib, Q, c.K_fib));
    CHECK(close(cq.S, Q, c.S));
    CHECK(close(cq.rm_sq, Q * Q, c.rm_sq));
    CHECK(close(cq.ric_sq, Q * Q, c.ric_sq));
  }
}

TEST_CASE("two-dimensional states have no Weyl part; constant maps give S = R") {
  const auto s = make_state(2, FiberKind::flat_torus, 32,
                            [](double x) { return 1.0 + 0.2 * std::sin(x); },
                            [](double x) { return 1.0 + 0.3 * std::cos(x); });
  const auto c = compute_curvature(s);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c.weyl_sq[i] == 0.0);
    CHECK(c.grad_phi_sq[i] == 0.0);
    CHECK(c.S[i] == c.R[i]);
  }
}

TEST_CASE("Weyl norm vanishes on a conformally flat product and is positive otherwise") {
  // S^1 x S^3 is conformally flat; a generic warped product in n = 5 is not.
  const auto cyl = make_state(4, FiberKind::round_sphere, 16, rhtest::constant_one,
                              rhtest::constant_one);
  const auto sn = sectional_norms(4, 0.0, 1.0);
  CHECK(sn.weyl_sq == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(compute_curvature(cyl).weyl_sq[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(sectional_norms(5, 0.3, 1.0).weyl_sq > 0.0);
}

TEST_CASE("homogeneous products") {
  SUBCASE("flat torus with a sloped map") {
    HomogeneousState h;
    h.alpha = 1.0;
    h.factors = {ProductFactor{2.0, FactorKind::flat_circle, 1, 1.0},
                 ProductFactor{1.0, FactorKind::flat_circle, 1, 0.0}};
    const auto c = compute_curvature_homogeneous(h);
    CHECK(c.R[0] == 0.0);
    CHECK(c.grad_phi_sq[0] == doctest::Approx(0.5));
    CHECK(c.S[0] == doctest::Approx(-0.5));
  }
  SUBCASE("unit round spheres") {
    for (int n : {2, 3, 4, 6}) {
      HomogeneousState h;
      h.factors = {ProductFactor{1.0, FactorKind::round_sphere, n, 0.0}};
      CHECK(compute_curvature_homogeneous(h).R[0] == doctest::Approx(n * (n - 1)));
    }
  }
  SUBCASE("S^1 x S^3") {
    HomogeneousState h;
    h.factors = {ProductFactor{1.0, FactorKind::flat_circle, 1, 0.0},
                 ProductFactor{1.0, FactorKind::round_sphere, 3, 0.0}};
    const auto c = compute_curvature_homogeneous(h);
    CHECK(c.R[0] == doctest::Approx(6.0));
    CHECK(c.S[0] == doctest::Approx(6.0));
  }
  SUBCASE("slopes only on circles") {
    HomogeneousState h;
    h.factors = {ProductFactor{1.0, FactorKind::round_sphere, 3, 1.0}};
    CHECK_THROWS_AS(validate(h), std::invalid_argument);
  }
}

TEST_CASE("invalid grid values are reported with their index") {
  auto s = make_state(3, FiberKind::round_sphere, 16, rhtest::constant_one,
                      rhtest::constant_one);
  s.psi[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    compute_curvature(s);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("5") != std::string::npos);
  }
  s.psi[5] = -1.0;
  CHECK_THROWS_AS(compute_curvature(s), std::invalid_argument);
}

TEST_CASE("lengths and volumes") {
  auto s = make_state(2, FiberKind::flat_torus, 16, rhtest::constant_one,
                      rhtest::constant_one);
  auto lv = reduced_lengths_and_volume(s);
  CHECK(lv.length == doctest::Approx(kTwoPi).epsilon(1e-15));
  CHECK(lv.volume == doctest::Approx(kTwoPi * kTwoPi).epsilon(1e-15));

  const double a = 2.7;
  s = make_state(2, FiberKind::flat_torus, 16, [&](double) { return std::sqrt(a); },
                 rhtest::constant_one);
  CHECK(reduced_lengths_and_volume(s).length ==
        doctest::Approx(kTwoPi * std::sqrt(a)).epsilon(1e-15));

  // 4 pi * integral of (2 + sin x)^2 over the circle is 36 pi^2.
  s = make_state(3, FiberKind::round_sphere, 32, rhtest::constant_one,
                 [](double x) { return 2.0 + std::sin(x); });
  CHECK(std::abs(reduced_lengths_and_volume(s).volume - 36.0 * M_PI * M_PI) <= 1e-10);
}

TEST_CASE("unit sphere and ball volumes") {
  CHECK(unit_sphere_volume(1) == doctest::Approx(kTwoPi));
  CHECK(unit_sphere_volume(2) == doctest::Approx(4 * M_PI));
  CHECK(unit_sphere_volume(3) == doctest::Approx(2 * M_PI * M_PI));
  CHECK(unit_ball_volume(2) == doctest::Approx(M_PI));
  CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * M_PI / 3.0));
  CHECK(unit_ball_volume(4) == doctest::Approx(M_PI * M_PI / 2.0));
}

}  // TEST_SUITE

TEST_SUITE("curvature_oracle") {

TEST_CASE("flat state agrees exactly") {
  const auto s = make_state(4, FiberKind::flat_torus, 16, rhtest::constant_one,
                            rhtest::constant_one);
  CHECK(curvature_oracle_check(s) <= 1e-12);
}

TEST_CASE("round cylinder agrees to 1e-8") {
  const auto s = make_state(4, FiberKind::round_sphere, 16, rhtest::constant_one,
                            [](double) { return 2.0; });
  CHECK(curvature_oracle_check(s) <= 1e-8);
}

TEST_CASE("varying warp converges at second order") {
  double e[3];
  const std::size_t ms[3] = {32, 64, 128};
  for (int k = 0; k < 3; ++k) {
    const auto s = make_state(4, FiberKind::round_sphere, ms[k], rhtest::constant_one,
                              [](double x) { return 2.0 + 0.3 * std::sin(x); });
    e[k] = curvature_oracle_check(s);
  }
  CHECK(std::log2(e[0] / e[1]) >= 1.9);
  CHECK(std::log2(e[1] / e[2]) >= 1.9);
}

TEST_CASE("torus fiber and varying f") {
  double e[3];
  const std::size_t ms[3] = {32, 64, 128};
  for (int k = 0; k < 3; ++k) {
    const auto s = make_state(3, FiberKind::flat_torus, ms[k],
                              [](double x) { return 1.0 + 0.2 * std::cos(x); },
                              [](double x) { return 1.5 + 0.3 * std::sin(2 * x); });
    e[k] = curvature_oracle_check(s);
  }
  CHECK(std::log2(e[0] / e[1]) >= 1.9);
  CHECK(std::log2(e[1] / e[2]) >= 1.9);
}

}  // TEST_SUITE

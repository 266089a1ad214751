#pragma once

// Symmetry-reduced states of the Ricci-Harmonic flow and their curvature.
//
// A warped state describes the metric
//
//     g = f(x)^2 dx^2 + psi(x)^2 g_fiber,    x in [0, 2pi) periodic,
//
// on S^1 x fiber, where the fiber is the unit round S^{n-1} or a flat torus
// T^{n-1} with unit circles, together with a map phi = w x + u(x) into a flat
// line (w = 0) or a flat circle (w != 0). Arc-length derivatives are
// d/ds = (1/f) d/dx.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rhflow {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class FiberKind { round_sphere, flat_torus };

/// Sectional curvature of the fiber (1 for the round sphere, 0 for the torus).
double fiber_curvature(FiberKind kind);
std::string to_string(FiberKind kind);
FiberKind fiber_kind_from_string(const std::string& name);

struct GridGeometry {
  std::size_t m = 0;
  double h = 0.0;

  /// Uniform periodic grid of m points on [0, 2pi). Requires m >= 8.
  static GridGeometry periodic(std::size_t m);
  double x(std::size_t i) const { return static_cast<double>(i) * h; }
};

struct WarpedState {
  int n = 2;
  FiberKind fiber = FiberKind::flat_torus;
  double alpha = 0.0;
  std::vector<double> f;
  std::vector<double> psi;
  long winding = 0;
  std::vector<double> phi_per;
  double t = 0.0;

  std::size_t size() const { return f.size(); }
  GridGeometry grid() const { return GridGeometry::periodic(f.size()); }
  /// Full map value phi(x_i) = w x_i + u_i.
  double phi(std::size_t i) const;
};

/// Throws std::invalid_argument naming the first offending grid index.
void validate(const WarpedState& state);

enum class FactorKind { flat_circle, round_sphere };

struct ProductFactor {
  double coefficient = 1.0;  // metric is coefficient * (unit factor metric)
  FactorKind kind = FactorKind::flat_circle;
  int dimension = 1;
  double slope = 0.0;  // map slope d(phi)/d(theta); flat circles only
};

/// Closed-form product geometry; the map is linear in the circle angle.
struct HomogeneousState {
  double alpha = 0.0;
  std::vector<ProductFactor> factors;
  double t = 0.0;

  int dimension() const;
};

void validate(const HomogeneousState& state);

/// Pointwise curvature and coupling quantities, all in an orthonormal frame.
struct CurvatureFields {
  int n = 2;
  std::vector<double> K_rad;        // -psi_ss / psi
  std::vector<double> K_fib;        // (c - psi_s^2) / psi^2
  std::vector<double> ric_rad;      // Ric(e_s, e_s) = (n-1) K_rad
  std::vector<double> ric_fib;      // Ric(e_v, e_v) = K_rad + (n-2) K_fib
  std::vector<double> R;
  std::vector<double> ric_sq;
  std::vector<double> rm_sq;
  std::vector<double> weyl_sq;
  std::vector<double> grad_phi_sq;
  std::vector<double> lap_phi;      // tension field; flat target
  std::vector<double> S;            // R - alpha |grad phi|^2
  std::vector<double> s_tensor_sq;  // |R_ij - alpha phi_i phi_j|^2
  std::vector<double> psi_s;
  std::vector<double> phi_s;

  std::size_t size() const { return R.size(); }
  void resize(std::size_t m);
};

/// Metric-curvature norms as a function of the two sectional curvatures.
struct SectionalNorms {
  double R;
  double ric_rad;
  double ric_fib;
  double ric_sq;
  double rm_sq;
  double weyl_sq;
};
SectionalNorms sectional_norms(int n, double K_rad, double K_fib);

/// Curvature of a warped state. The S-type fields use `coupling` in place of
/// the state's alpha; the plain overload uses state.alpha.
CurvatureFields compute_curvature(const WarpedState& state);
CurvatureFields compute_curvature(const WarpedState& state, double coupling);

CurvatureFields compute_curvature_homogeneous(const HomogeneousState& state);

struct LengthVolume {
  double length;  // integral of f dx
  double volume;  // vol(fiber) * integral of f psi^{n-1} dx
};
LengthVolume reduced_lengths_and_volume(const WarpedState& state);

/// volume of the unit round S^k
double unit_sphere_volume(int k);
/// volume of the unit ball in R^k
double unit_ball_volume(int k);
double fiber_volume(FiberKind kind, int n);

double homogeneous_volume(const HomogeneousState& state);

/// Homothety g -> Q g. Lengths scale by sqrt(Q), time by Q; phi is unchanged.
WarpedState scale(const WarpedState& state, double Q);
HomogeneousState scale(const HomogeneousState& state, double Q);

/// Product circle(a_0) x fiber as a warped state: the first factor must be a
/// flat circle; the rest must be either all unit-dimension flat circles sharing
/// one coefficient or a single round sphere.
WarpedState to_warped(const HomogeneousState& state, std::size_t m);

double max_of(std::span<const double> v);
double min_of(std::span<const double> v);

}  // namespace rhflow

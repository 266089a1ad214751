#pragma once

// Grid kernels for the warped-product stencils.
//
// Each kernel has a serial reference implementation (one pass, periodic index
// arithmetic at every point) and an OpenMP implementation (half-point fluxes
// in a first parallel pass, node values in a second). Both evaluate the same
// floating-point expressions in the same order, so their outputs are
// bitwise identical; the serial path is kept as the test oracle.
//
// Discretization (h = 2pi/m, f_{i+1/2} = (f_i + f_{i+1})/2):
//   v_s  = (v_{i+1} - v_{i-1}) / (2 h f_i)
//   v_ss = [ (v_{i+1}-v_i)/(h f_{i+1/2}) - (v_i-v_{i-1})/(h f_{i-1/2}) ] / (h f_i)
// where a field with winding slope w has its differences shifted by w h.

#include <cstddef>
#include <span>
#include <vector>

#include "rhflow/geometry.hpp"

namespace rhflow::kernels {

enum class Exec { serial, parallel };

/// true when the library was built with OpenMP
bool parallel_available();

/// Grid size at and above which Exec::parallel is chosen automatically.
inline constexpr std::size_t kParallelThreshold = 4096;
Exec choose(std::size_t m);

struct WarpedView {
  int n;
  double c_fiber;
  double coupling;  // alpha used in S and |S_ij|^2
  long winding;
  double h;
  std::span<const double> f;
  std::span<const double> psi;
  std::span<const double> u;
};

WarpedView view_of(const WarpedState& state, double coupling);

struct Derivatives {
  std::vector<double> f_t;
  std::vector<double> psi_t;
  std::vector<double> u_t;
};

void curvature_serial(const WarpedView& v, CurvatureFields& out);
void curvature_parallel(const WarpedView& v, CurvatureFields& out);
void curvature(const WarpedView& v, CurvatureFields& out, Exec exec);

/// Warped Laplacian v_ss + (n-1)(psi_s/psi) v_s of a periodic field with
/// winding slope `slope`.
void laplacian_serial(int n, double h, std::span<const double> f,
                      std::span<const double> psi, std::span<const double> v,
                      double slope, std::span<double> out);
void laplacian_parallel(int n, double h, std::span<const double> f,
                        std::span<const double> psi, std::span<const double> v,
                        double slope, std::span<double> out);

/// Time derivatives of (f, psi, u) for the flow
///   d/dt g = -2 Ric + alpha dphi (x) dphi,   d/dt phi = tau_g phi.
/// `flow_alpha` is the coefficient in the metric equation; `fields` must be
/// the curvature of the same state.
void rhs_from_fields(const WarpedView& v, const CurvatureFields& fields,
                     double flow_alpha, Derivatives& out, Exec exec);

}  // namespace rhflow::kernels

#include "rhflow/kernels.hpp"

#include <cmath>

#ifdef RHFLOW_HAVE_OPENMP
#include <omp.h>
#endif

namespace rhflow::kernels {

namespace {

struct PointDerivs {
  double psi_s;
  double psi_ss;
  double phi_s;
  double phi_ss;
};

// Shared by both implementations so the node arithmetic is identical.
inline void finish_point(const WarpedView& v, std::size_t i,
                         const PointDerivs& d, CurvatureFields& out) {
  const double psi = v.psi[i];
  const double k_rad = -d.psi_ss / psi;
  const double k_fib = (v.c_fiber - d.psi_s * d.psi_s) / (psi * psi);
  const SectionalNorms norms = sectional_norms(v.n, k_rad, k_fib);
  const double grad_sq = d.phi_s * d.phi_s;
  const double lap = d.phi_ss + (v.n - 1) * (d.psi_s / psi) * d.phi_s;
  const double s_rad = norms.ric_rad - v.coupling * grad_sq;

  out.K_rad[i] = k_rad;
  out.K_fib[i] = k_fib;
  out.ric_rad[i] = norms.ric_rad;
  out.ric_fib[i] = norms.ric_fib;
  out.R[i] = norms.R;
  out.ric_sq[i] = norms.ric_sq;
  out.rm_sq[i] = norms.rm_sq;
  out.weyl_sq[i] = norms.weyl_sq;
  out.grad_phi_sq[i] = grad_sq;
  out.lap_phi[i] = lap;
  out.S[i] = norms.R - v.coupling * grad_sq;
  out.s_tensor_sq[i] =
      s_rad * s_rad + (v.n - 1) * norms.ric_fib * norms.ric_fib;
  out.psi_s[i] = d.psi_s;
  out.phi_s[i] = d.phi_s;
}

inline double half_mean(double a, double b) { return 0.5 * (a + b); }

}  // namespace

bool parallel_available() {
#ifdef RHFLOW_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

Exec choose(std::size_t m) {
  return (parallel_available() && m >= kParallelThreshold) ? Exec::parallel
                                                           : Exec::serial;
}

WarpedView view_of(const WarpedState& state, double coupling) {
  return WarpedView{state.n,
                    fiber_curvature(state.fiber),
                    coupling,
                    state.winding,
                    kTwoPi / static_cast<double>(state.size()),
                    state.f,
                    state.psi,
                    state.phi_per};
}

void curvature_serial(const WarpedView& v, CurvatureFields& out) {
  const std::size_t m = v.f.size();
  out.n = v.n;
  out.resize(m);
  const double h = v.h;
  const double w = static_cast<double>(v.winding);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t ip = (i + 1) % m;
    const std::size_t im = (i + m - 1) % m;
    const double fh_p = half_mean(v.f[i], v.f[ip]);
    const double fh_m = half_mean(v.f[im], v.f[i]);

    PointDerivs d;
    d.psi_s = (v.psi[ip] - v.psi[im]) / (2.0 * h * v.f[i]);
    const double dpsi_p = (v.psi[ip] - v.psi[i]) / (h * fh_p);
    const double dpsi_m = (v.psi[i] - v.psi[im]) / (h * fh_m);
    d.psi_ss = (dpsi_p - dpsi_m) / (h * v.f[i]);

    d.phi_s = (w + (v.u[ip] - v.u[im]) / (2.0 * h)) / v.f[i];
    const double dphi_p = (w + (v.u[ip] - v.u[i]) / h) / fh_p;
    const double dphi_m = (w + (v.u[i] - v.u[im]) / h) / fh_m;
    d.phi_ss = (dphi_p - dphi_m) / (h * v.f[i]);

    finish_point(v, i, d, out);
  }
}

void curvature_parallel(const WarpedView& v, CurvatureFields& out) {
  const std::size_t m = v.f.size();
  out.n = v.n;
  out.resize(m);
  const double h = v.h;
  const double w = static_cast<double>(v.winding);
  // Half-point fluxes; entry j sits between nodes j and j+1.
  std::vector<double> dpsi(m), dphi(m);
  const auto sm = static_cast<std::ptrdiff_t>(m);

#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < sm; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const std::size_t jp = (jj + 1 == m) ? 0 : jj + 1;
      const double fh = half_mean(v.f[jj], v.f[jp]);
      dpsi[jj] = (v.psi[jp] - v.psi[jj]) / (h * fh);
      dphi[jj] = (w + (v.u[jp] - v.u[jj]) / h) / fh;
    }

#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < sm; ++j) {
      const auto i = static_cast<std::size_t>(j);
      const std::size_t ip = (i + 1 == m) ? 0 : i + 1;
      const std::size_t im = (i == 0) ? m - 1 : i - 1;
      PointDerivs d;
      d.psi_s = (v.psi[ip] - v.psi[im]) / (2.0 * h * v.f[i]);
      d.psi_ss = (dpsi[i] - dpsi[im]) / (h * v.f[i]);
      d.phi_s = (w + (v.u[ip] - v.u[im]) / (2.0 * h)) / v.f[i];
      d.phi_ss = (dphi[i] - dphi[im]) / (h * v.f[i]);
      finish_point(v, i, d, out);
    }
  }
}

void curvature(const WarpedView& v, CurvatureFields& out, Exec exec) {
  if (exec == Exec::parallel && parallel_available()) {
    curvature_parallel(v, out);
  } else {
    curvature_serial(v, out);
  }
}

void laplacian_serial(int n, double h, std::span<const double> f,
                      std::span<const double> psi, std::span<const double> v,
                      double slope, std::span<double> out) {
  const std::size_t m = f.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t ip = (i + 1) % m;
    const std::size_t im = (i + m - 1) % m;
    const double fh_p = half_mean(f[i], f[ip]);
    const double fh_m = half_mean(f[im], f[i]);
    const double psi_s = (psi[ip] - psi[im]) / (2.0 * h * f[i]);
    const double v_s = (slope + (v[ip] - v[im]) / (2.0 * h)) / f[i];
    const double dv_p = (slope + (v[ip] - v[i]) / h) / fh_p;
    const double dv_m = (slope + (v[i] - v[im]) / h) / fh_m;
    const double v_ss = (dv_p - dv_m) / (h * f[i]);
    out[i] = v_ss + (n - 1) * (psi_s / psi[i]) * v_s;
  }
}

void laplacian_parallel(int n, double h, std::span<const double> f,
                        std::span<const double> psi, std::span<const double> v,
                        double slope, std::span<double> out) {
  const std::size_t m = f.size();
  std::vector<double> dv(m);
  const auto sm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < sm; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const std::size_t jp = (jj + 1 == m) ? 0 : jj + 1;
      dv[jj] = (slope + (v[jp] - v[jj]) / h) / half_mean(f[jj], f[jp]);
    }
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < sm; ++j) {
      const auto i = static_cast<std::size_t>(j);
      const std::size_t ip = (i + 1 == m) ? 0 : i + 1;
      const std::size_t im = (i == 0) ? m - 1 : i - 1;
      const double psi_s = (psi[ip] - psi[im]) / (2.0 * h * f[i]);
      const double v_s = (slope + (v[ip] - v[im]) / (2.0 * h)) / f[i];
      const double v_ss = (dv[i] - dv[im]) / (h * f[i]);
      out[i] = v_ss + (n - 1) * (psi_s / psi[i]) * v_s;
    }
  }
}

void rhs_from_fields(const WarpedView& v, const CurvatureFields& fields,
                     double flow_alpha, Derivatives& out, Exec exec) {
  const std::size_t m = v.f.size();
  out.f_t.resize(m);
  out.psi_t.resize(m);
  out.u_t.resize(m);
  const auto sm = static_cast<std::ptrdiff_t>(m);
  // d/dt f^2 = -2 Ric_xx + alpha phi_x^2 ;  d/dt psi^2 = -2 psi^2 Ric(e_v,e_v)
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t j = 0; j < sm; ++j) {
    const auto i = static_cast<std::size_t>(j);
    out.f_t[i] = v.f[i] * (-fields.ric_rad[i] +
                           0.5 * flow_alpha * fields.grad_phi_sq[i]);
    out.psi_t[i] = -v.psi[i] * fields.ric_fib[i];
    out.u_t[i] = fields.lap_phi[i];
  }
}

}  // namespace rhflow::kernels

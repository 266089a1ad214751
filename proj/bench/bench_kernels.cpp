// Serial reference vs OpenMP kernels on a smooth n = 4 neck.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "rhflow/geometry.hpp"
#include "rhflow/kernels.hpp"

using namespace rhflow;

namespace {

WarpedState neck(std::size_t m) {
  WarpedState s;
  s.n = 4;
  s.fiber = FiberKind::round_sphere;
  s.alpha = 1.0;
  const auto g = GridGeometry::periodic(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = g.x(i);
    s.f.push_back(1.0 + 0.1 * std::cos(x));
    s.psi.push_back(1.0 + 0.05 * std::sin(x));
    s.phi_per.push_back(0.1 * std::sin(x));
  }
  return s;
}

template <kernels::Exec E>
void BM_curvature(benchmark::State& st) {
  const auto s = neck(static_cast<std::size_t>(st.range(0)));
  const auto v = kernels::view_of(s, s.alpha);
  CurvatureFields out;
  out.resize(s.size());
  for (auto _ : st) {
    kernels::curvature(v, out, E);
    benchmark::DoNotOptimize(out.R.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <kernels::Exec E>
void BM_laplacian(benchmark::State& st) {
  const auto s = neck(static_cast<std::size_t>(st.range(0)));
  std::vector<double> out(s.size());
  const double h = s.grid().h;
  for (auto _ : st) {
    if constexpr (E == kernels::Exec::serial) {
      kernels::laplacian_serial(s.n, h, s.f, s.psi, s.phi_per, 0.0, out);
    } else {
      kernels::laplacian_parallel(s.n, h, s.f, s.psi, s.phi_per, 0.0, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_curvature<kernels::Exec::serial>)->RangeMultiplier(8)->Range(64, 1 << 18);
BENCHMARK(BM_curvature<kernels::Exec::parallel>)->RangeMultiplier(8)->Range(64, 1 << 18);
BENCHMARK(BM_laplacian<kernels::Exec::serial>)->RangeMultiplier(8)->Range(64, 1 << 18);
BENCHMARK(BM_laplacian<kernels::Exec::parallel>)->RangeMultiplier(8)->Range(64, 1 << 18);

BENCHMARK_MAIN();

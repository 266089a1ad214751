#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "rhflow/geometry.hpp"

namespace rhtest {

using Profile = std::function<double(double)>;

inline rhflow::WarpedState make_state(int n, rhflow::FiberKind fiber, std::size_t m,
                                      const Profile& f, const Profile& psi,
                                      const Profile& u = nullptr, long winding = 0,
                                      double alpha = 0.0) {
  rhflow::WarpedState s;
  s.n = n;
  s.fiber = fiber;
  s.alpha = alpha;
  s.winding = winding;
  const auto g = rhflow::GridGeometry::periodic(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = g.x(i);
    s.f.push_back(f(x));
    s.psi.push_back(psi(x));
    s.phi_per.push_back(u ? u(x) : 0.0);
  }
  return s;
}

inline double constant_one(double) { return 1.0; }

inline double rel(double got, double want) {
  const double d = std::abs(got - want);
  return want != 0.0 ? d / std::abs(want) : d;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("rhflow_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace rhtest

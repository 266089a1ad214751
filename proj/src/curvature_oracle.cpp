#include "rhflow/curvature_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rhflow {

namespace {

// Dense row-major n x n matrix and rank-3/4 index helpers.
struct Mat {
  int n = 0;
  std::vector<double> a;
  explicit Mat(int dim = 0) : n(dim), a(static_cast<std::size_t>(dim * dim)) {}
  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i * n + j)]; }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i * n + j)];
  }
};

Mat inverse(const Mat& m) {
  const int n = m.n;
  Mat work = m;
  Mat inv(n);
  for (int i = 0; i < n; ++i) inv(i, i) = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(work(r, col)) > std::abs(work(piv, col))) piv = r;
    }
    if (work(piv, col) == 0.0) throw std::runtime_error("singular metric");
    if (piv != col) {
      for (int c = 0; c < n; ++c) {
        std::swap(work(piv, c), work(col, c));
        std::swap(inv(piv, c), inv(col, c));
      }
    }
    const double d = work(col, col);
    for (int c = 0; c < n; ++c) {
      work(col, c) /= d;
      inv(col, c) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double s = work(r, col);
      if (s == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        work(r, c) -= s * work(col, c);
        inv(r, c) -= s * inv(col, c);
      }
    }
  }
  return inv;
}

// Gamma^a_{bc} stored as [(a*n + b)*n + c]
using Rank3 = std::vector<double>;

class MetricChart {
 public:
  MetricChart(const WarpedState& s, double eps)
      : state_(s), n_(s.n), m_(static_cast<int>(s.size())),
        h_(kTwoPi / static_cast<double>(s.size())), eps_(eps) {}

  int dim() const { return n_; }

  Mat metric(int i, const std::vector<double>& theta) const {
    const auto ii = static_cast<std::size_t>(wrap(i));
    Mat g(n_);
    g(0, 0) = state_.f[ii] * state_.f[ii];
    const double p2 = state_.psi[ii] * state_.psi[ii];
    double prod = 1.0;
    for (int k = 1; k < n_; ++k) {
      g(k, k) = p2 * (state_.fiber == FiberKind::round_sphere ? prod : 1.0);
      const double s = std::sin(theta[static_cast<std::size_t>(k - 1)]);
      prod *= s * s;
    }
    return g;
  }

  // dg[c] = partial_c g
  std::vector<Mat> metric_derivs(int i, const std::vector<double>& theta) const {
    std::vector<Mat> dg;
    dg.reserve(static_cast<std::size_t>(n_));
    {
      const Mat gp = metric(i + 1, theta);
      const Mat gm = metric(i - 1, theta);
      Mat d(n_);
      for (std::size_t e = 0; e < d.a.size(); ++e) {
        d.a[e] = (gp.a[e] - gm.a[e]) / (2.0 * h_);
      }
      dg.push_back(d);
    }
    for (int k = 1; k < n_; ++k) {
      Mat d(n_);
      d.a = fiber_derivative(
          theta, k - 1, [&](const std::vector<double>& th) { return metric(i, th).a; });
      dg.push_back(std::move(d));
    }
    return dg;
  }

  Rank3 christoffel(int i, const std::vector<double>& theta) const {
    const Mat g = metric(i, theta);
    const Mat gi = inverse(g);
    const auto dg = metric_derivs(i, theta);
    const int n = n_;
    Rank3 gam(static_cast<std::size_t>(n * n * n), 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int d = 0; d < n; ++d) {
            s += gi(a, d) * (dg[static_cast<std::size_t>(b)](d, c) +
                             dg[static_cast<std::size_t>(c)](d, b) -
                             dg[static_cast<std::size_t>(d)](b, c));
          }
          gam[idx3(a, b, c)] = 0.5 * s;
        }
    return gam;
  }

  // dgam[e] = partial_e Gamma
  std::vector<Rank3> christoffel_derivs(int i,
                                        const std::vector<double>& theta) const {
    std::vector<Rank3> out;
    out.reserve(static_cast<std::size_t>(n_));
    {
      const Rank3 gp = christoffel(i + 1, theta);
      const Rank3 gm = christoffel(i - 1, theta);
      Rank3 d(gp.size());
      for (std::size_t e = 0; e < d.size(); ++e) {
        d[e] = (gp[e] - gm[e]) / (2.0 * h_);
      }
      out.push_back(std::move(d));
    }
    for (int k = 1; k < n_; ++k) {
      out.push_back(fiber_derivative(
          theta, k - 1,
          [&](const std::vector<double>& th) { return christoffel(i, th); }));
    }
    return out;
  }

  std::size_t idx3(int a, int b, int c) const {
    return static_cast<std::size_t>((a * n_ + b) * n_ + c);
  }

 private:
  int wrap(int i) const { return ((i % m_) + m_) % m_; }

  // Fourth-order central difference in fiber coordinate j of a flat array.
  template <class Eval>
  std::vector<double> fiber_derivative(const std::vector<double>& theta, int j,
                                       Eval eval) const {
    auto shifted = [&](double s) {
      auto th = theta;
      th[static_cast<std::size_t>(j)] += s;
      return eval(th);
    };
    const auto p2 = shifted(2.0 * eps_), p1 = shifted(eps_);
    const auto m1 = shifted(-eps_), m2 = shifted(-2.0 * eps_);
    std::vector<double> out(p1.size());
    for (std::size_t e = 0; e < out.size(); ++e) {
      out[e] = (-p2[e] + 8.0 * p1[e] - 8.0 * m1[e] + m2[e]) / (12.0 * eps_);
    }
    return out;
  }

  const WarpedState& state_;
  int n_;
  int m_;
  double h_;
  double eps_;
};

double rel_discrepancy(const std::vector<double>& got,
                       const std::vector<double>& ref) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    diff = std::max(diff, std::abs(got[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace

double OracleReport::max() const { return std::max({R, ric_sq, rm_sq}); }

OracleFields christoffel_curvature(const WarpedState& state, double fiber_step) {
  validate(state);
  const MetricChart chart(state, fiber_step);
  const int n = chart.dim();
  // Fiber chart point away from the coordinate poles.
  std::vector<double> theta(static_cast<std::size_t>(n - 1));
  for (int j = 0; j < n - 1; ++j) theta[static_cast<std::size_t>(j)] = 1.0 + 0.25 * j;

  const std::size_t m = state.size();
  OracleFields out;
  out.R.resize(m);
  out.ric_sq.resize(m);
  out.rm_sq.resize(m);
  const auto N = static_cast<std::size_t>(n);
  auto i4 = [N](int a, int b, int c, int d) {
    return ((static_cast<std::size_t>(a) * N + static_cast<std::size_t>(b)) * N +
            static_cast<std::size_t>(c)) * N + static_cast<std::size_t>(d);
  };

  for (std::size_t node = 0; node < m; ++node) {
    const int i = static_cast<int>(node);
    const Mat g = chart.metric(i, theta);
    const Mat gi = inverse(g);
    const Rank3 gam = chart.christoffel(i, theta);
    const auto dgam = chart.christoffel_derivs(i, theta);

    // R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}
    std::vector<double> riem(N * N * N * N, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            double v = dgam[static_cast<std::size_t>(c)][chart.idx3(a, d, b)] -
                       dgam[static_cast<std::size_t>(d)][chart.idx3(a, c, b)];
            for (int e = 0; e < n; ++e) {
              v += gam[chart.idx3(a, c, e)] * gam[chart.idx3(e, d, b)] -
                   gam[chart.idx3(a, d, e)] * gam[chart.idx3(e, c, b)];
            }
            riem[i4(a, b, c, d)] = v;
          }

    Mat ric(n);
    for (int b = 0; b < n; ++b)
      for (int d = 0; d < n; ++d) {
        double v = 0.0;
        for (int a = 0; a < n; ++a) v += riem[i4(a, b, a, d)];
        ric(b, d) = v;
      }
    double R = 0.0;
    for (int b = 0; b < n; ++b)
      for (int d = 0; d < n; ++d) R += gi(b, d) * ric(b, d);

    // Ric^{ab} = g^{ac} g^{bd} R_cd
    double ric_sq = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double up = 0.0;
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) up += gi(a, c) * gi(b, d) * ric(c, d);
        ric_sq += up * ric(a, b);
      }

    // R_{abcd} = g_{ae} R^e_{bcd}
    std::vector<double> low(riem.size(), 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            double v = 0.0;
            for (int e = 0; e < n; ++e) v += g(a, e) * riem[i4(e, b, c, d)];
            low[i4(a, b, c, d)] = v;
          }
    // R^{abcd} = g^{ap} g^{bq} g^{cr} g^{ds} R_{pqrs}
    double rm_sq = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            const double lv = low[i4(a, b, c, d)];
            if (lv == 0.0) continue;
            double up = 0.0;
            for (int p = 0; p < n; ++p) {
              if (gi(a, p) == 0.0) continue;
              for (int q = 0; q < n; ++q) {
                if (gi(b, q) == 0.0) continue;
                for (int r = 0; r < n; ++r) {
                  if (gi(c, r) == 0.0) continue;
                  for (int s = 0; s < n; ++s) {
                    up += gi(a, p) * gi(b, q) * gi(c, r) * gi(d, s) *
                          low[i4(p, q, r, s)];
                  }
                }
              }
            }
            rm_sq += lv * up;
          }

    out.R[node] = R;
    out.ric_sq[node] = ric_sq;
    out.rm_sq[node] = rm_sq;
  }
  return out;
}

OracleReport curvature_oracle_report(const WarpedState& state) {
  const CurvatureFields closed = compute_curvature(state);
  const OracleFields oracle = christoffel_curvature(state);
  OracleReport rep;
  rep.R = rel_discrepancy(oracle.R, closed.R);
  rep.ric_sq = rel_discrepancy(oracle.ric_sq, closed.ric_sq);
  rep.rm_sq = rel_discrepancy(oracle.rm_sq, closed.rm_sq);
  return rep;
}

double curvature_oracle_check(const WarpedState& state) {
  return curvature_oracle_report(state).max();
}

}  // namespace rhflow

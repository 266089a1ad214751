#pragma once

// Independent curvature oracle: assembles the full n x n coordinate metric of
// a warped state in the chart (x, fiber angles), differentiates it to
// Christoffel symbols and the Riemann tensor, and contracts. Shares no code
// with the closed-form warped formulas.

#include <vector>

#include "rhflow/geometry.hpp"

namespace rhflow {

struct OracleFields {
  std::vector<double> R;
  std::vector<double> ric_sq;
  std::vector<double> rm_sq;
};

struct OracleReport {
  double R = 0.0;
  double ric_sq = 0.0;
  double rm_sq = 0.0;
  double max() const;
};

/// Ricci-calculus curvature at every grid node. x-derivatives use the grid
/// (second-order central differences); fiber derivatives use a fourth-order
/// stencil of step `fiber_step` on the analytic fiber metric.
OracleFields christoffel_curvature(const WarpedState& state,
                                   double fiber_step = 2e-3);

/// Per-quantity max relative discrepancy between the closed-form curvature
/// and the Christoffel oracle (normalised by the max of the closed form).
OracleReport curvature_oracle_report(const WarpedState& state);

/// Largest entry of curvature_oracle_report.
double curvature_oracle_check(const WarpedState& state);

}  // namespace rhflow

// SPDX-License-Identifier: Apache-2.0
//
// One-dimensional orientation search shared by both solvers: a coarse grid
// over [0, 2*pi), golden-section refinement of every grid local minimum, then
// selection of the best candidate whose distances are physically meaningful.
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace hvsense {

struct SearchOptions {
  double grid_step = 0.5 * std::numbers::pi / 180.0;
  double refine_tol = 1e-8;
  // A second candidate within this factor of the winner's residual marks the
  // estimate ambiguous.
  double ambiguity_ratio = 10.0;
  // Residuals (meters) below this are exact fits; two of them always tie.
  double zero_residual = 1e-6;
  // Best residual (meters) above this means no orientation fits the data.
  double residual_floor = 1e3;
  std::size_t max_candidates = 8;
};

struct OrientationCandidate {
  double omega = 0.0;
  double residual = 0.0;
  bool physical = false;
};

struct OrientationResult {
  double omega = 0.0;
  double residual = 0.0;
  bool ambiguous = false;
  bool physical = false;
  std::vector<OrientationCandidate> candidates;  // sorted by residual
};

/// Golden-section minimization of a unimodal f on [lo, hi]; stops once the
/// bracket is narrower than tol. Returns the abscissa.
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double tol);

/// `residual` maps an orientation to a nonnegative discrepancy; `physical`
/// reports whether the orientation yields admissible path distances (it may
/// throw, which counts as not physical).
OrientationResult search_orientation(const std::function<double(double)>& residual,
                                     const std::function<bool(double)>& physical,
                                     const SearchOptions& options);

}  // namespace hvsense

// SPDX-License-Identifier: Apache-2.0
#include "hvsense/orientation_search.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hvsense/errors.hpp"
#include "hvsense/geometry.hpp"

namespace hvsense {

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > tol) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

constexpr int kSubdivisions = 10;

OrientationResult search_orientation(const std::function<double(double)>& residual,
                                     const std::function<bool(double)>& physical,
                                     const SearchOptions& options) {
  if (!(options.grid_step > 0.0) || !(options.refine_tol > 0.0))
    throw SensingError(ErrorKind::configuration, "grid step and refine tolerance must be positive");

  const auto n = static_cast<std::size_t>(std::ceil(kTwoPi / options.grid_step));
  const double step = kTwoPi / static_cast<double>(n);
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = residual(step * static_cast<double>(i));

  // Local minima on the circular grid.
  std::vector<std::size_t> minima;
  for (std::size_t i = 0; i < n; ++i) {
    const double left = grid[(i + n - 1) % n];
    const double right = grid[(i + 1) % n];
    if (grid[i] <= left && grid[i] < right) minima.push_back(i);
  }
  if (minima.empty()) minima.push_back(0);  // flat residual
  std::sort(minima.begin(), minima.end(),
            [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  if (minima.size() > options.max_candidates) minima.resize(options.max_candidates);

  // Two roots closer than a grid cell show up as one coarse minimum, so the
  // neighbourhood of each is rescanned on a finer grid before refinement.
  std::vector<double> centres;
  const double fine = step / static_cast<double>(kSubdivisions);
  for (const std::size_t i : minima) {
    const double base = step * static_cast<double>(i);
    const int half = 2 * kSubdivisions;
    std::vector<double> f(2 * half + 1);
    for (int k = -half; k <= half; ++k) f[static_cast<std::size_t>(k + half)] = residual(base + k * fine);
    const std::size_t before = centres.size();
    for (int k = -half + 1; k < half; ++k) {
      const auto j = static_cast<std::size_t>(k + half);
      if (f[j] <= f[j - 1] && f[j] < f[j + 1]) centres.push_back(base + k * fine);
    }
    if (centres.size() == before) centres.push_back(base);
  }

  OrientationResult result;
  for (const double centre : centres) {
    const double omega = wrap_angle(
        golden_section_minimize(residual, centre - fine, centre + fine, options.refine_tol));
    const bool duplicate = std::any_of(
        result.candidates.begin(), result.candidates.end(), [&](const OrientationCandidate& c) {
          return std::abs(angle_difference(c.omega, omega)) < 10.0 * options.refine_tol;
        });
    if (duplicate) continue;

    OrientationCandidate cand;
    cand.omega = omega;
    cand.residual = residual(omega);
    try {
      cand.physical = physical(omega);
    } catch (const SensingError&) {
      cand.physical = false;
    }
    result.candidates.push_back(cand);
  }
  std::sort(result.candidates.begin(), result.candidates.end(),
            [](const auto& a, const auto& b) { return a.residual < b.residual; });

  auto best = std::find_if(result.candidates.begin(), result.candidates.end(),
                           [](const auto& c) { return c.physical; });
  if (best == result.candidates.end()) best = result.candidates.begin();

  result.omega = best->omega;
  result.residual = best->residual;
  result.physical = best->physical;
  for (auto it = result.candidates.begin(); it != result.candidates.end(); ++it) {
    if (it == best || (best->physical && !it->physical)) continue;
    if (it->residual <= std::max(options.ambiguity_ratio * best->residual, options.zero_residual))
      result.ambiguous = true;
  }

  if (result.residual > options.residual_floor) {
    std::ostringstream msg;
    msg << "no consistent orientation: best residual " << result.residual
        << " m exceeds floor " << options.residual_floor << " m";
    throw SensingError(ErrorKind::no_consistent_orientation, msg.str());
  }
  return result;
}

}  // namespace hvsense

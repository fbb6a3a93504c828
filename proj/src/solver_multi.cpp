// SPDX-License-Identifier: Apache-2.0
#include "hvsense/solver_multi.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hvsense/solver_single.hpp"

namespace hvsense::multi {

namespace {

// Coefficients of L and W in offset_k: offset_k = L * lcoef[k] * u(w) + W * wcoef[k] * u_perp(w).
constexpr std::array<double, 5> kLengthCoef{0.0, 0.0, 1.0, 1.0, 0.0};
constexpr std::array<double, 5> kWidthCoef{0.0, 0.0, 0.0, 1.0, 1.0};

void require_labels(std::span<const PathObservation> obs) {
  for (const auto& o : obs)
    if (o.cluster == Cluster::single)
      throw SensingError(ErrorKind::configuration,
                         "four-cluster sensing needs cluster labels 1..4 on every path");
}

struct Ordering {
  std::vector<std::size_t> order;
  std::vector<PathObservation> sorted;
  std::array<std::size_t, 4> partition{};
  Cluster anchor = Cluster::k1;
};

Ordering group_by_cluster(std::span<const PathObservation> obs) {
  require_labels(obs);
  Ordering g;
  g.order.resize(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) g.order[i] = i;
  std::stable_sort(g.order.begin(), g.order.end(), [&](std::size_t a, std::size_t b) {
    return cluster_index(obs[a].cluster) < cluster_index(obs[b].cluster);
  });
  for (const std::size_t i : g.order) {
    g.sorted.push_back(obs[i]);
    ++g.partition[static_cast<std::size_t>(cluster_index(obs[i].cluster) - 1)];
  }
  if (!g.sorted.empty()) g.anchor = g.sorted.front().cluster;
  return g;
}

struct Observability {
  bool length = false;
  bool width = false;
};

Observability observability(std::span<const PathObservation> sorted) {
  Observability out;
  if (sorted.empty()) return out;
  const auto a = static_cast<std::size_t>(cluster_index(sorted.front().cluster));
  for (const auto& o : sorted) {
    const auto k = static_cast<std::size_t>(cluster_index(o.cluster));
    out.length = out.length || kLengthCoef[k] != kLengthCoef[a];
    out.width = out.width || kWidthCoef[k] != kWidthCoef[a];
  }
  return out;
}

void check_feasible(const Ordering& g, const Options& options) {
  if (options.known_dimensions) {
    single::require_paths(g.sorted.size(), single::kMinPaths,
                          "known dimensions still need four NLoS paths");
    return;
  }
  single::require_paths(g.sorted.size(), kMinPaths,
                        "a 4-cluster array needs at least six paths");
  const Observability obs = observability(g.sorted);
  if (!obs.length || !obs.width)
    throw SensingError(ErrorKind::unobservable_dimension,
                       std::string("unobservable: no path separates ") +
                           (!obs.length ? "L" : "W") + " from the reference cluster");
}

MultiLinearSystem assemble_sorted(const Ordering& g, double omega, double c) {
  const single::LinearSystem core = single::assemble(g.sorted, omega, c);
  const Eigen::Index rows = core.a.rows() / 2;
  const Eigen::Index cols = core.a.cols();

  MultiLinearSystem sys;
  sys.omega = omega;
  sys.partition = g.partition;
  sys.anchor = g.anchor;
  sys.order = g.order;
  sys.b = core.b;
  sys.a_hat = Eigen::MatrixXd::Zero(core.a.rows(), cols + 2);
  sys.a_hat.leftCols(cols) = core.a;

  const double cw = std::cos(omega);
  const double sw = std::sin(omega);
  const auto a = static_cast<std::size_t>(cluster_index(g.anchor));
  for (Eigen::Index p = 1; p <= rows; ++p) {
    const auto k = static_cast<std::size_t>(cluster_index(g.sorted[static_cast<std::size_t>(p)].cluster));
    const double dl = kLengthCoef[k] - kLengthCoef[a];
    const double dw = kWidthCoef[k] - kWidthCoef[a];
    sys.a_hat(p - 1, cols) = -dl * cw;
    sys.a_hat(rows + p - 1, cols) = -dl * sw;
    sys.a_hat(p - 1, cols + 1) = dw * sw;
    sys.a_hat(rows + p - 1, cols + 1) = -dw * cw;
  }
  return sys;
}

// With known dimensions the L/W columns move to the right-hand side.
void fold_known(MultiLinearSystem& sys, const Dimensions& dims) {
  const Eigen::Index cols = sys.a_hat.cols();
  sys.b -= dims.length * sys.a_hat.col(cols - 2) + dims.width * sys.a_hat.col(cols - 1);
  sys.a_hat.conservativeResize(Eigen::NoChange, cols - 2);
}

MultiLinearSystem system_for(const Ordering& g, double omega, const Options& options) {
  MultiLinearSystem sys = assemble_sorted(g, omega, options.c);
  if (options.known_dimensions) fold_known(sys, *options.known_dimensions);
  return sys;
}

// Meters; admits collapsed layouts whose sides come out as rounding noise.
constexpr double kSideTolerance = 1e-6;

OrientationResult search_sorted(const Ordering& g, const Options& options) {
  check_feasible(g, options);
  return hvsense::search_orientation(
      [&](double w) {
        const MultiLinearSystem sys = system_for(g, w, options);
        return linalg::null_space_residual(sys.a_hat, sys.b, options.rank_tol);
      },
      [&](double w) {
        const MultiLinearSystem sys = system_for(g, w, options);
        const Eigen::VectorXd z = linalg::least_squares(sys.a_hat, sys.b, options.rank_tol);
        const auto paths = static_cast<Eigen::Index>(g.sorted.size());
        // Vertices run counterclockwise from cluster 1, so a root with a
        // negative side describes a mirrored rectangle and is rejected.
        if (!options.known_dimensions && (z(paths + 1) < -kSideTolerance || z(paths + 2) < -kSideTolerance))
          return false;
        return single::distances_physical(g.sorted, z, options.c);
      },
      options.search);
}

}  // namespace

Offsets offsets(double omega, double length, double width, Cluster k) {
  const Vec2 v = cluster_offset(omega, length, width, k);
  return {v.x(), v.y()};
}

MultiLinearSystem assemble_multi(std::span<const PathObservation> obs, double omega, double c) {
  return assemble_sorted(group_by_cluster(obs), omega, c);
}

double orientation_residual_multi(std::span<const PathObservation> obs, double omega,
                                  const Options& options) {
  const Ordering g = group_by_cluster(obs);
  check_feasible(g, options);
  const MultiLinearSystem sys = system_for(g, omega, options);
  return linalg::null_space_residual(sys.a_hat, sys.b, options.rank_tol);
}

OrientationResult search_orientation_multi(std::span<const PathObservation> obs,
                                           const Options& options) {
  return search_sorted(group_by_cluster(obs), options);
}

MultiEstimate sense_multi(std::span<const PathObservation> obs, const Options& options) {
  const Ordering g = group_by_cluster(obs);
  const OrientationResult orientation = search_sorted(g, options);

  MultiEstimate est;
  est.omega = orientation.omega;
  est.residual = orientation.residual;
  est.ambiguous = orientation.ambiguous;
  est.order = g.order;

  const MultiLinearSystem sys = system_for(g, est.omega, options);
  const Eigen::VectorXd sol = linalg::least_squares(sys.a_hat, sys.b, options.rank_tol);
  const auto paths = static_cast<Eigen::Index>(g.sorted.size());
  est.z_hat.resize(paths + 3);
  est.z_hat.head(paths + 1) = sol.head(paths + 1);
  if (options.known_dimensions) {
    est.length = options.known_dimensions->length;
    est.width = options.known_dimensions->width;
  } else {
    est.length = sol(paths + 1);
    est.width = sol(paths + 2);
  }
  est.z_hat(paths + 1) = est.length;
  est.z_hat(paths + 2) = est.width;
  est.nonphysical = !single::distances_physical(g.sorted, est.z_hat.head(paths + 1), options.c);
  est.reflected_layout = est.length < 0.0 || est.width < 0.0;

  // Every path, shifted by its cluster offset, is an estimate of vertex 1.
  const std::vector<double> d = single::path_lengths(g.sorted, est.z_hat.head(paths + 1), options.c);
  Vec2 reference = Vec2::Zero();
  for (std::size_t p = 0; p < g.sorted.size(); ++p) {
    const Vec2 origin = path_origin(g.sorted[p], est.z_hat(static_cast<Eigen::Index>(p)), d[p], est.omega);
    reference += origin + cluster_offset(est.omega, est.length, est.width, g.sorted[p].cluster);
  }
  reference /= static_cast<double>(g.sorted.size());

  est.centroid = Vec2::Zero();
  for (int k = 1; k <= 4; ++k) {
    const Vec2 v = reference - cluster_offset(est.omega, est.length, est.width, cluster_from_index(k));
    est.vertices[static_cast<std::size_t>(k - 1)] = v;
    est.centroid += v;
  }
  est.centroid /= 4.0;
  return est;
}

}  // namespace hvsense::multi

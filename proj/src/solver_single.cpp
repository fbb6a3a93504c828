// SPDX-License-Identifier: Apache-2.0
#include "hvsense/solver_single.hpp"

#include <cmath>
#include <string>

namespace hvsense::single {

void require_paths(std::size_t have, std::size_t required, const char* why) {
  if (have < required)
    throw SensingError(ErrorKind::infeasible, "infeasible: P<" + std::to_string(required) + " (" +
                                                  std::to_string(have) + " paths; " + why + ")");
}

LinearSystem assemble(std::span<const PathObservation> obs, double omega, double c) {
  const auto paths = static_cast<Eigen::Index>(obs.size());
  if (paths < 2)
    throw SensingError(ErrorKind::insufficient_paths, "assembly needs at least two paths");

  const Eigen::Index rows = paths - 1;
  LinearSystem sys;
  sys.omega = omega;
  sys.a = Eigen::MatrixXd::Zero(2 * rows, paths + 1);
  sys.b = Eigen::VectorXd::Zero(2 * rows);

  const std::vector<Toa> rho = tdoa(obs);
  const double cos_ref = std::cos(obs[0].aod + omega);
  const double sin_ref = std::sin(obs[0].aod + omega);
  const double a1_cos = std::cos(obs[0].aoa) + cos_ref;
  const double a1_sin = std::sin(obs[0].aoa) + sin_ref;

  for (Eigen::Index p = 1; p < paths; ++p) {
    const auto& o = obs[static_cast<std::size_t>(p)];
    const double cos_p = std::cos(o.aod + omega);
    const double sin_p = std::sin(o.aod + omega);
    const double range_diff = c * to_seconds(rho[static_cast<std::size_t>(p)]);
    const Eigen::Index rc = p - 1;
    const Eigen::Index rs = rows + p - 1;

    sys.a(rc, 0) = a1_cos;
    sys.a(rc, p) = -(std::cos(o.aoa) + cos_p);
    sys.a(rc, paths) = cos_p - cos_ref;
    sys.b(rc) = -range_diff * cos_p;

    sys.a(rs, 0) = a1_sin;
    sys.a(rs, p) = -(std::sin(o.aoa) + sin_p);
    sys.a(rs, paths) = sin_p - sin_ref;
    sys.b(rs) = -range_diff * sin_p;
  }
  return sys;
}

double orientation_residual(std::span<const PathObservation> obs, double omega,
                            const Options& options) {
  require_paths(obs.size(), kMinPaths, "a 1-cluster array needs at least four NLoS paths");
  const LinearSystem sys = assemble(obs, omega, options.c);
  return linalg::null_space_residual(sys.a, sys.b, options.rank_tol);
}

std::vector<double> path_lengths(std::span<const PathObservation> obs, const Eigen::VectorXd& z,
                                 double c) {
  const std::vector<Toa> rho = tdoa(obs);
  const double d1 = z(static_cast<Eigen::Index>(obs.size()));
  std::vector<double> d(obs.size());
  for (std::size_t p = 0; p < obs.size(); ++p) d[p] = d1 + c * to_seconds(rho[p]);
  return d;
}

bool distances_physical(std::span<const PathObservation> obs, const Eigen::VectorXd& z,
                        double c) {
  const std::vector<double> d = path_lengths(obs, z, c);
  for (std::size_t p = 0; p < obs.size(); ++p) {
    const double nu = z(static_cast<Eigen::Index>(p));
    if (!(nu > 0.0) || !(d[p] > nu)) return false;
  }
  return true;
}

OrientationResult search_orientation(std::span<const PathObservation> obs,
                                     const Options& options) {
  require_paths(obs.size(), kMinPaths, "a 1-cluster array needs at least four NLoS paths");
  return hvsense::search_orientation(
      [&](double w) { return orientation_residual(obs, w, options); },
      [&](double w) {
        const LinearSystem sys = assemble(obs, w, options.c);
        return distances_physical(obs, linalg::least_squares(sys.a, sys.b, options.rank_tol),
                                  options.c);
      },
      options.search);
}

namespace {

void reject_duplicates(std::span<const PathObservation> obs) {
  for (std::size_t i = 0; i < obs.size(); ++i)
    for (std::size_t j = i + 1; j < obs.size(); ++j)
      if (obs[i].aoa == obs[j].aoa && obs[i].aod == obs[j].aod && obs[i].toa == obs[j].toa &&
          obs[i].cluster == obs[j].cluster)
        throw SensingError(ErrorKind::rank_deficient,
                           "paths " + std::to_string(i) + " and " + std::to_string(j) +
                               " are identical; the distance system is degenerate");
}

}  // namespace

Eigen::VectorXd solve_distances(std::span<const PathObservation> obs, double omega,
                                const Options& options) {
  reject_duplicates(obs);
  const LinearSystem sys = assemble(obs, omega, options.c);
  return linalg::least_squares(sys.a, sys.b, options.rank_tol);
}

SingleEstimate sense(std::span<const PathObservation> obs, const Options& options) {
  const OrientationResult orientation = search_orientation(obs, options);

  SingleEstimate est;
  est.omega = orientation.omega;
  est.residual = orientation.residual;
  est.ambiguous = orientation.ambiguous;
  est.z = solve_distances(obs, est.omega, options);
  est.nonphysical = !distances_physical(obs, est.z, options.c);

  const std::vector<double> d = path_lengths(obs, est.z, options.c);
  for (std::size_t p = 0; p < obs.size(); ++p) {
    est.per_path_origins.push_back(
        path_origin(obs[p], est.z(static_cast<Eigen::Index>(p)), d[p], est.omega));
    est.position += est.per_path_origins.back();
  }
  est.position /= static_cast<double>(obs.size());
  return est;
}

}  // namespace hvsense::single

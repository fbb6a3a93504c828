// SPDX-License-Identifier: Apache-2.0
//
// Waveform-level front end: orthogonal transmit waveforms, array manifolds,
// received-signal synthesis and the estimation chain
//   matched filter -> ToA peak detection -> AoA/AoD per detected lag.
//
// Samples are taken at the Nyquist rate 2*B_s. Doppler is not modeled and the
// carrier phase 2*pi*f_c*lambda is absorbed into the complex path gain.
#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hvsense/geometry.hpp"

namespace hvsense::signal {

using Complex = std::complex<double>;

inline constexpr double kDegree = std::numbers::pi / 180.0;

struct WaveformSet {
  Eigen::MatrixXcd samples;  // N x M_t, column m is the unit-energy waveform of antenna m
  double bandwidth = 100e6;
  Cluster cluster = Cluster::single;

  double sample_rate() const { return 2.0 * bandwidth; }
  Eigen::Index length() const { return samples.rows(); }
  Eigen::Index antennas() const { return samples.cols(); }
};

/// M_t unit-energy waveforms of N samples, exactly orthogonal at lag 0
/// (orthonormalized complex Gaussian basis). Throws impossible_orthogonality
/// when N < M_t.
WaveformSet generate_waveforms(int antennas, int length, std::uint64_t seed,
                               double bandwidth = 100e6, Cluster cluster = Cluster::single);

/// One set per cluster label, all mutually orthogonal (needs N >= M_t * sets).
std::vector<WaveformSet> generate_waveform_sets(std::span<const Cluster> clusters, int antennas,
                                                int length, std::uint64_t seed,
                                                double bandwidth = 100e6);

double wavelength(double carrier);

/// Planar array in its vehicle's frame (x along the heading).
class ArrayManifold {
public:
  ArrayManifold(std::vector<Vec2> elements, double carrier);

  /// Elements along the vehicle axis.
  static ArrayManifold uniform_linear(int elements, double carrier, double spacing = 0.0);
  /// Elements on a circle with the given arc spacing between neighbours.
  static ArrayManifold uniform_circular(int elements, double carrier, double spacing = 0.0);

  /// Entry m = exp(j 2 pi f_c dt_m), dt_m the arrival-time lead of element m
  /// over element 1 for a plane wave from `angle`. Entry 1 is always 1.
  Eigen::VectorXcd response(double angle) const;

  Eigen::Index size() const { return static_cast<Eigen::Index>(elements_.size()); }
  double carrier() const { return carrier_; }
  const std::vector<Vec2>& elements() const { return elements_; }

private:
  std::vector<Vec2> elements_;
  double carrier_;
};

struct ReceivedSignal {
  Eigen::MatrixXcd samples;  // M_r x N
  double sample_rate = 200e6;
  double noise_power = 0.0;  // per sample, per antenna
  Toa start_time{0};         // receiver clock time of sample 0
};

enum class DelayMode { nearest, bandlimited };

struct PathComponent {
  double aoa = 0.0;
  double aod = 0.0;
  Toa toa{0};
  Complex gain{1.0, 0.0};
  Cluster cluster = Cluster::single;
};

struct SynthesisOptions {
  DelayMode delay = DelayMode::nearest;
  Toa start_time{0};
  // Capture length in samples; 0 sizes the window to the latest path.
  Eigen::Index length = 0;
};

/// r[n] = sum_p gain_p b(aoa_p) a(aod_p)^T s_k(n - delay_p) + noise, noise
/// circularly-symmetric Gaussian of `noise_power` per sample and antenna.
ReceivedSignal synthesize_rx(std::span<const PathComponent> paths,
                             std::span<const WaveformSet> waveform_sets,
                             const ArrayManifold& rx_array, const ArrayManifold& tx_array,
                             double noise_power, std::uint64_t seed,
                             const SynthesisOptions& options = {});

struct MatchedFilterBank {
  std::vector<Eigen::MatrixXcd> y;  // y[z] = sum_n r[n] s^H[n - z], M_r x M_t
  double sample_rate = 200e6;
  Toa start_time{0};
  Cluster cluster = Cluster::single;
  Eigen::Index waveform_length = 0;  // 0 when unknown (e.g. loaded from a dump)

  Toa lag_time(Eigen::Index lag) const;
  Eigen::VectorXd power() const;  // squared Frobenius norm per lag
};

/// Exact discrete cross-correlation for every fully overlapping lag.
MatchedFilterBank matched_filter(const ReceivedSignal& rx, const WaveformSet& waveforms);

// The floor (noise plus waveform sidelobes) is estimated robustly from the lag
// powers: a peak must exceed median + threshold_sigmas * 1.4826 * MAD and also
// min_ratio * median. Independently, a peak must exceed sidelobe_guard times
// the expected sidelobe power M_t/N of the strongest peak, which matters when
// noiseless captures leave most lags empty.
struct DetectionPolicy {
  double threshold_sigmas = 6.0;
  double min_ratio = 1.5;
  double sidelobe_guard = 3.0;
  std::size_t max_peaks = 64;
};

/// Median lag power: the noise-plus-sidelobe energy of a typical snapshot.
double floor_power(const MatchedFilterBank& bank);

struct Detection {
  Eigen::Index lag = 0;
  Toa toa{0};
  double power = 0.0;
};

std::vector<Detection> detect_toas(const MatchedFilterBank& bank, const DetectionPolicy& policy = {});

struct AngleOptions {
  double grid_step = 0.1 * kDegree;
  // Largest acceptable grid quantization error; the grid may not be coarser
  // than twice this.
  double tolerance = 0.1 * kDegree;
  // A secondary singular value counts as another path when it exceeds this
  // fraction of the first and noise_edge_margin times the largest singular
  // value expected from the snapshot floor alone.
  double multipath_fraction = 0.4;
  double noise_edge_margin = 1.5;
  std::size_t max_paths_per_lag = 3;
};

struct AngleEstimate {
  double aoa = 0.0;
  double aod = 0.0;
  double strength = 0.0;
};

/// Angle search with precomputed steering matrices, reusable across lags.
class AngleEstimator {
public:
  AngleEstimator(const ArrayManifold& rx_array, const ArrayManifold& tx_array,
                 const AngleOptions& options = {});

  /// Dominant path from the rank-1 factorization of y; when the second
  /// singular value is significant, a noise-subspace search over
  /// b(theta) (x) a(phi) that can return several pairs. `floor` is the
  /// expected squared Frobenius norm of the non-path part of y.
  std::vector<AngleEstimate> estimate(const Eigen::MatrixXcd& y, double floor = 0.0) const;

private:
  std::vector<AngleEstimate> dominant(const Eigen::MatrixXcd& u, const Eigen::MatrixXcd& v) const;
  std::vector<AngleEstimate> subspace(const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& u,
                                      const Eigen::MatrixXcd& v, Eigen::Index rank) const;

  AngleOptions options_;
  std::vector<double> grid_;
  Eigen::MatrixXcd rx_steering_;  // M_r x G
  Eigen::MatrixXcd tx_steering_;  // M_t x G
};

std::vector<AngleEstimate> estimate_angles(const Eigen::MatrixXcd& y, const ArrayManifold& rx_array,
                                           const ArrayManifold& tx_array,
                                           const AngleOptions& options = {}, double floor = 0.0);

struct ExtractOptions {
  DetectionPolicy detection;
  AngleOptions angles;
};

/// Matched filter, peak detection and angle estimation per waveform set;
/// observations are labeled with the set's cluster and ordered by ToA, then
/// cluster.
std::vector<PathObservation> extract_observations(const ReceivedSignal& rx,
                                                  std::span<const WaveformSet> waveform_sets,
                                                  const ArrayManifold& rx_array,
                                                  const ArrayManifold& tx_array,
                                                  const ExtractOptions& options = {});

}  // namespace hvsense::signal

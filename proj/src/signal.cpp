// SPDX-License-Identifier: Apache-2.0
#include "hvsense/signal.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <fftw3.h>

namespace hvsense::signal {
namespace {

// FFTW planning touches global state; execution of an existing plan does not.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Fft {
public:
  Fft(int n, int sign) : n_(n) {
    in_ = static_cast<Complex*>(fftw_malloc(sizeof(Complex) * n));
    out_ = static_cast<Complex*>(fftw_malloc(sizeof(Complex) * n));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in_),
                             reinterpret_cast<fftw_complex*>(out_), sign, FFTW_ESTIMATE);
  }
  ~Fft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  Complex* in() { return in_; }
  const Complex* out() const { return out_; }
  void run() { fftw_execute(plan_); }
  int size() const { return n_; }

private:
  int n_;
  Complex* in_;
  Complex* out_;
  fftw_plan plan_;
};

// Smallest 2^a 3^b 5^c >= n; FFTW is fastest on these sizes.
int smooth_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

Complex cgauss(std::mt19937_64& rng, double variance) {
  std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
  const double re = g(rng);
  return {re, g(rng)};
}

const WaveformSet& set_for(std::span<const WaveformSet> sets, Cluster k) {
  for (const auto& s : sets)
    if (s.cluster == k) return s;
  throw SensingError(ErrorKind::configuration,
                     "no waveform set for cluster " + std::to_string(cluster_index(k)));
}

// Indices of the `count` strongest circular local maxima of a spectrum.
std::vector<Eigen::Index> strongest_peaks(const Eigen::VectorXd& s, Eigen::Index count) {
  const Eigen::Index n = s.size();
  std::vector<Eigen::Index> peaks;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double left = s((i + n - 1) % n);
    const double right = s((i + 1) % n);
    if (s(i) > left && s(i) >= right) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return s(a) > s(b); });
  if (static_cast<Eigen::Index>(peaks.size()) > count) peaks.resize(count);
  return peaks;
}

Eigen::Index argmax(const Eigen::VectorXd& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return i;
}

}  // namespace

WaveformSet generate_waveforms(int antennas, int length, std::uint64_t seed, double bandwidth,
                               Cluster cluster) {
  const Cluster one[] = {cluster};
  auto sets = generate_waveform_sets(one, antennas, length, seed, bandwidth);
  return std::move(sets.front());
}

std::vector<WaveformSet> generate_waveform_sets(std::span<const Cluster> clusters, int antennas,
                                                int length, std::uint64_t seed, double bandwidth) {
  if (antennas < 1 || clusters.empty())
    throw SensingError(ErrorKind::configuration, "need at least one antenna and one cluster");
  if (!(bandwidth > 0.0)) throw SensingError(ErrorKind::configuration, "bandwidth must be positive");
  const int total = antennas * static_cast<int>(clusters.size());
  if (length < total)
    throw SensingError(ErrorKind::impossible_orthogonality,
                       "cannot fit " + std::to_string(total) + " orthogonal waveforms in " +
                           std::to_string(length) + " samples");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXcd basis(length, total);
  for (Eigen::Index j = 0; j < basis.cols(); ++j)
    for (Eigen::Index i = 0; i < basis.rows(); ++i) basis(i, j) = cgauss(rng, 1.0);
  const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(basis);
  const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(length, total);

  std::vector<WaveformSet> sets;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    WaveformSet s;
    s.samples = q.middleCols(static_cast<Eigen::Index>(k) * antennas, antennas);
    s.bandwidth = bandwidth;
    s.cluster = clusters[k];
    sets.push_back(std::move(s));
  }
  return sets;
}

double wavelength(double carrier) { return kSpeedOfLight / carrier; }

ArrayManifold::ArrayManifold(std::vector<Vec2> elements, double carrier)
    : elements_(std::move(elements)), carrier_(carrier) {
  if (elements_.empty() || !(carrier_ > 0.0))
    throw SensingError(ErrorKind::configuration, "array needs elements and a positive carrier");
}

ArrayManifold ArrayManifold::uniform_linear(int elements, double carrier, double spacing) {
  if (elements < 1) throw SensingError(ErrorKind::configuration, "array needs elements");
  if (spacing <= 0.0) spacing = wavelength(carrier) / 2.0;
  std::vector<Vec2> pos;
  for (int m = 0; m < elements; ++m) pos.emplace_back(m * spacing, 0.0);
  return {std::move(pos), carrier};
}

ArrayManifold ArrayManifold::uniform_circular(int elements, double carrier, double spacing) {
  if (elements < 1) throw SensingError(ErrorKind::configuration, "array needs elements");
  if (spacing <= 0.0) spacing = wavelength(carrier) / 2.0;
  std::vector<Vec2> pos;
  if (elements == 1) {
    pos.emplace_back(0.0, 0.0);
    return {std::move(pos), carrier};
  }
  const double step = kTwoPi / elements;
  const double radius = spacing / (2.0 * std::sin(step / 2.0));
  for (int m = 0; m < elements; ++m)
    pos.emplace_back(radius * std::cos(m * step), radius * std::sin(m * step));
  return {std::move(pos), carrier};
}

Eigen::VectorXcd ArrayManifold::response(double angle) const {
  // A plane wave arriving from direction u reaches element m earlier by
  // (r_m - r_1).u / c.
  const Vec2 u(std::cos(angle), std::sin(angle));
  const double k = kTwoPi * carrier_ / kSpeedOfLight;
  Eigen::VectorXcd out(size());
  for (Eigen::Index m = 0; m < size(); ++m)
    out(m) = std::polar(1.0, k * (elements_[m] - elements_[0]).dot(u));
  return out;
}

ReceivedSignal synthesize_rx(std::span<const PathComponent> paths,
                             std::span<const WaveformSet> waveform_sets,
                             const ArrayManifold& rx_array, const ArrayManifold& tx_array,
                             double noise_power, std::uint64_t seed,
                             const SynthesisOptions& options) {
  if (waveform_sets.empty())
    throw SensingError(ErrorKind::configuration, "no waveform sets");
  if (!(noise_power >= 0.0)) throw SensingError(ErrorKind::configuration, "negative noise power");
  const double fs = waveform_sets.front().sample_rate();
  for (const auto& s : waveform_sets) {
    if (s.sample_rate() != fs)
      throw SensingError(ErrorKind::configuration, "waveform sets disagree on sample rate");
    if (s.antennas() != tx_array.size())
      throw SensingError(ErrorKind::configuration, "waveform count differs from tx array size");
  }

  std::vector<double> delays;
  Eigen::Index length = options.length;
  Eigen::Index needed = 0;
  for (const auto& p : paths) {
    const double delay = to_seconds(p.toa - options.start_time) * fs;
    const auto& s = set_for(waveform_sets, p.cluster);
    delays.push_back(delay);
    needed = std::max(needed, static_cast<Eigen::Index>(std::ceil(delay)) + s.length() + 1);
  }
  if (length == 0) length = needed;
  if (length <= 0) throw SensingError(ErrorKind::configuration, "empty capture window");

  const Eigen::Index mr = rx_array.size();
  ReceivedSignal rx;
  rx.samples = Eigen::MatrixXcd::Zero(mr, length);
  rx.sample_rate = fs;
  rx.noise_power = noise_power;
  rx.start_time = options.start_time;

  std::unique_ptr<Fft> fwd, inv;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    const auto& s = set_for(waveform_sets, p.cluster);
    const Eigen::Index n = s.length();
    const double delay = delays[i];
    if (delay < 0.0 || std::ceil(delay) + n > length)
      throw SensingError(ErrorKind::configuration,
                         "path " + std::to_string(i) + " falls outside the capture window");

    const Eigen::MatrixXcd mix =
        p.gain * rx_array.response(p.aoa) * tx_array.response(p.aod).transpose();
    const Eigen::MatrixXcd emitted = mix * s.samples.transpose();  // M_r x N

    if (options.delay == DelayMode::nearest) {
      const auto start = static_cast<Eigen::Index>(std::llround(delay));
      rx.samples.middleCols(start, n) += emitted;
      continue;
    }

    // Band-limited delay: linear phase ramp in the DFT domain of the window.
    const int len = static_cast<int>(length);
    if (!fwd) {
      fwd = std::make_unique<Fft>(len, FFTW_FORWARD);
      inv = std::make_unique<Fft>(len, FFTW_BACKWARD);
    }
    for (Eigen::Index r = 0; r < mr; ++r) {
      std::fill(fwd->in(), fwd->in() + len, Complex{});
      for (Eigen::Index t = 0; t < n; ++t) fwd->in()[t] = emitted(r, t);
      fwd->run();
      for (int k = 0; k < len; ++k) {
        const int f = k < (len + 1) / 2 ? k : k - len;
        double phase = -kTwoPi * f * delay / len;
        Complex ramp = std::polar(1.0, phase);
        if (len % 2 == 0 && k == len / 2) ramp = std::cos(phase);
        inv->in()[k] = fwd->out()[k] * ramp;
      }
      inv->run();
      for (int t = 0; t < len; ++t) rx.samples(r, t) += inv->out()[t] / static_cast<double>(len);
    }
  }

  if (noise_power > 0.0) {
    std::mt19937_64 rng(seed);
    for (Eigen::Index t = 0; t < length; ++t)
      for (Eigen::Index r = 0; r < mr; ++r) rx.samples(r, t) += cgauss(rng, noise_power);
  }
  return rx;
}

Toa MatchedFilterBank::lag_time(Eigen::Index lag) const {
  return start_time + toa_from_seconds(static_cast<double>(lag) / sample_rate);
}

Eigen::VectorXd MatchedFilterBank::power() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(y.size()));
  for (std::size_t z = 0; z < y.size(); ++z) p(static_cast<Eigen::Index>(z)) = y[z].squaredNorm();
  return p;
}

MatchedFilterBank matched_filter(const ReceivedSignal& rx, const WaveformSet& waveforms) {
  if (rx.sample_rate != waveforms.sample_rate())
    throw SensingError(ErrorKind::configuration, "receiver and waveform sample rates differ");
  MatchedFilterBank bank;
  bank.sample_rate = rx.sample_rate;
  bank.start_time = rx.start_time;
  bank.cluster = waveforms.cluster;
  bank.waveform_length = waveforms.length();

  const Eigen::Index nrx = rx.samples.cols();
  const Eigen::Index n = waveforms.length();
  const Eigen::Index mr = rx.samples.rows();
  const Eigen::Index mt = waveforms.antennas();
  if (nrx < n) return bank;
  const Eigen::Index lags = nrx - n + 1;
  bank.y.assign(static_cast<std::size_t>(lags), Eigen::MatrixXcd::Zero(mr, mt));

  // Circular correlation of length >= N_rx equals the linear one for every
  // fully overlapping lag.
  const int len = smooth_size(static_cast<int>(nrx));
  Fft fwd(len, FFTW_FORWARD), inv(len, FFTW_BACKWARD);
  auto spectrum = [&](auto&& fill) {
    std::fill(fwd.in(), fwd.in() + len, Complex{});
    fill(fwd.in());
    fwd.run();
    return Eigen::VectorXcd(Eigen::Map<const Eigen::VectorXcd>(fwd.out(), len));
  };
  std::vector<Eigen::VectorXcd> rspec, sspec;
  for (Eigen::Index i = 0; i < mr; ++i)
    rspec.push_back(spectrum([&](Complex* buf) {
      for (Eigen::Index t = 0; t < nrx; ++t) buf[t] = rx.samples(i, t);
    }));
  for (Eigen::Index j = 0; j < mt; ++j)
    sspec.push_back(spectrum([&](Complex* buf) {
      for (Eigen::Index t = 0; t < n; ++t) buf[t] = waveforms.samples(t, j);
    }));

  for (Eigen::Index i = 0; i < mr; ++i)
    for (Eigen::Index j = 0; j < mt; ++j) {
      Eigen::Map<Eigen::VectorXcd>(inv.in(), len) = rspec[i].cwiseProduct(sspec[j].conjugate());
      inv.run();
      for (Eigen::Index z = 0; z < lags; ++z) bank.y[z](i, j) = inv.out()[z] / static_cast<double>(len);
    }
  return bank;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

double floor_power(const MatchedFilterBank& bank) {
  const Eigen::VectorXd p = bank.power();
  return median(std::vector<double>(p.data(), p.data() + p.size()));
}

std::vector<Detection> detect_toas(const MatchedFilterBank& bank, const DetectionPolicy& policy) {
  std::vector<Detection> out;
  const Eigen::VectorXd p = bank.power();
  const Eigen::Index n = p.size();
  if (n == 0) return out;

  std::vector<double> values(p.data(), p.data() + n);
  const double floor = median(values);
  for (auto& v : values) v = std::abs(v - floor);
  const double spread = 1.4826 * median(values);
  double threshold = std::max(floor + policy.threshold_sigmas * spread, policy.min_ratio * floor);
  if (bank.waveform_length > 0) {
    const double sidelobe =
        static_cast<double>(bank.y.front().cols()) / static_cast<double>(bank.waveform_length);
    threshold = std::max(threshold, policy.sidelobe_guard * sidelobe * p.maxCoeff());
  }

  for (Eigen::Index z = 0; z < n; ++z) {
    if (!(p(z) > threshold)) continue;
    if (z > 0 && !(p(z) > p(z - 1))) continue;
    if (z + 1 < n && p(z) < p(z + 1)) continue;
    out.push_back({z, bank.lag_time(z), p(z)});
  }
  if (out.size() > policy.max_peaks) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(policy.max_peaks),
                      out.end(), [](const auto& a, const auto& b) { return a.power > b.power; });
    out.resize(policy.max_peaks);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.lag < b.lag; });
  }
  return out;
}

AngleEstimator::AngleEstimator(const ArrayManifold& rx_array, const ArrayManifold& tx_array,
                               const AngleOptions& options)
    : options_(options) {
  if (!(options.grid_step > 0.0) || !(options.tolerance > 0.0))
    throw SensingError(ErrorKind::configuration, "angle grid step and tolerance must be positive");
  if (options.grid_step > 2.0 * options.tolerance)
    throw SensingError(ErrorKind::configuration,
                       "angle grid step " + std::to_string(options.grid_step) +
                           " rad is too coarse for tolerance " + std::to_string(options.tolerance) +
                           " rad");
  const auto g = static_cast<Eigen::Index>(std::ceil(kTwoPi / options.grid_step - 1e-9));
  rx_steering_.resize(rx_array.size(), g);
  tx_steering_.resize(tx_array.size(), g);
  for (Eigen::Index i = 0; i < g; ++i) {
    const double a = kTwoPi * static_cast<double>(i) / static_cast<double>(g);
    grid_.push_back(a);
    rx_steering_.col(i) = rx_array.response(a);
    tx_steering_.col(i) = tx_array.response(a);
  }
}

std::vector<AngleEstimate> AngleEstimator::estimate(const Eigen::MatrixXcd& y, double floor) const {
  if (y.rows() != rx_steering_.rows() || y.cols() != tx_steering_.rows())
    throw SensingError(ErrorKind::configuration, "snapshot shape does not match the arrays");
  if (y.squaredNorm() == 0.0) return {};
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  // Largest singular value of an M_r x M_t matrix of i.i.d. entries with the
  // floor's per-entry power.
  const double per_entry = floor / static_cast<double>(y.size());
  const double edge = std::sqrt(per_entry) * (std::sqrt(double(y.rows())) + std::sqrt(double(y.cols())));
  const double cut = std::max(options_.multipath_fraction * s(0), options_.noise_edge_margin * edge);
  Eigen::Index rank = 1;
  while (rank < s.size() - 1 && rank < static_cast<Eigen::Index>(options_.max_paths_per_lag) &&
         s(rank) > cut)
    ++rank;
  if (rank == 1) return dominant(svd.matrixU(), svd.matrixV());
  return subspace(y, svd.matrixU(), svd.matrixV(), rank);
}

std::vector<AngleEstimate> AngleEstimator::dominant(const Eigen::MatrixXcd& u,
                                                    const Eigen::MatrixXcd& v) const {
  const Eigen::VectorXd rx_fit = (rx_steering_.adjoint() * u.col(0)).cwiseAbs();
  const Eigen::VectorXd tx_fit = (tx_steering_.transpose() * v.col(0)).cwiseAbs();
  const Eigen::Index i = argmax(rx_fit);
  const Eigen::Index j = argmax(tx_fit);
  const double norm = std::sqrt(static_cast<double>(rx_steering_.rows() * tx_steering_.rows()));
  return {{grid_[i], grid_[j], rx_fit(i) * tx_fit(j) / norm}};
}

std::vector<AngleEstimate> AngleEstimator::subspace(const Eigen::MatrixXcd& y,
                                                    const Eigen::MatrixXcd& u,
                                                    const Eigen::MatrixXcd& v,
                                                    Eigen::Index rank) const {
  // Column space of y is spanned by the b(theta_k), row space by conj(a(phi_k)).
  // Each angle set comes from the noise-subspace spectrum on its own side and
  // the pairs are matched by the least-squares path amplitudes.
  auto pseudo_spectrum = [](const Eigen::MatrixXcd& proj, Eigen::Index m) {
    const Eigen::VectorXd captured = proj.cwiseAbs2().colwise().sum().transpose() / double(m);
    return Eigen::VectorXd((1.0 - captured.array()).max(1e-12).inverse());
  };
  const Eigen::Index mr = rx_steering_.rows(), mt = tx_steering_.rows();
  const auto rx_peaks =
      strongest_peaks(pseudo_spectrum(u.leftCols(rank).adjoint() * rx_steering_, mr), rank);
  const auto tx_peaks =
      strongest_peaks(pseudo_spectrum(v.leftCols(rank).transpose() * tx_steering_, mt), rank);
  if (rx_peaks.empty() || tx_peaks.empty()) return dominant(u, v);

  Eigen::MatrixXcd bm(mr, static_cast<Eigen::Index>(rx_peaks.size()));
  Eigen::MatrixXcd am(mt, static_cast<Eigen::Index>(tx_peaks.size()));
  for (std::size_t k = 0; k < rx_peaks.size(); ++k) bm.col(k) = rx_steering_.col(rx_peaks[k]);
  for (std::size_t k = 0; k < tx_peaks.size(); ++k) am.col(k) = tx_steering_.col(tx_peaks[k]);
  const Eigen::MatrixXcd g = bm.completeOrthogonalDecomposition().pseudoInverse() * y *
                             am.transpose().completeOrthogonalDecomposition().pseudoInverse();

  Eigen::MatrixXd mag = g.cwiseAbs();
  std::vector<AngleEstimate> out;
  const auto pairs = std::min(bm.cols(), am.cols());
  for (Eigen::Index k = 0; k < pairs; ++k) {
    Eigen::Index i = 0, j = 0;
    const double best = mag.maxCoeff(&i, &j);
    if (!(best > 0.0)) break;
    out.push_back({grid_[rx_peaks[i]], grid_[tx_peaks[j]], best});
    mag.row(i).setConstant(-1.0);
    mag.col(j).setConstant(-1.0);
  }
  return out;
}

std::vector<AngleEstimate> estimate_angles(const Eigen::MatrixXcd& y, const ArrayManifold& rx_array,
                                           const ArrayManifold& tx_array,
                                           const AngleOptions& options, double floor) {
  return AngleEstimator(rx_array, tx_array, options).estimate(y, floor);
}

std::vector<PathObservation> extract_observations(const ReceivedSignal& rx,
                                                  std::span<const WaveformSet> waveform_sets,
                                                  const ArrayManifold& rx_array,
                                                  const ArrayManifold& tx_array,
                                                  const ExtractOptions& options) {
  const AngleEstimator estimator(rx_array, tx_array, options.angles);
  std::vector<PathObservation> out;
  for (const auto& set : waveform_sets) {
    const auto bank = matched_filter(rx, set);
    const double floor = floor_power(bank);
    for (const auto& det : detect_toas(bank, options.detection))
      for (const auto& a : estimator.estimate(bank.y[static_cast<std::size_t>(det.lag)], floor))
        out.push_back({a.aoa, a.aod, det.toa, set.cluster});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.toa != b.toa) return a.toa < b.toa;
    return cluster_index(a.cluster) < cluster_index(b.cluster);
  });
  return out;
}

}  // namespace hvsense::signal

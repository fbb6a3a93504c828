// SPDX-License-Identifier: Apache-2.0
#include "hvsense/signal_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <string>

namespace hvsense::io {
namespace {

constexpr std::array<char, 4> kMagic{'H', 'V', 'R', 'X'};
enum : std::uint32_t { kSignal = 0, kBank = 1 };

template <class U>
void put(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}
void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }
void put_c(std::ostream& out, std::complex<double> v) {
  put_f64(out, v.real());
  put_f64(out, v.imag());
}

template <class U>
U get(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw SensingError(ErrorKind::io, "truncated signal dump");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }
std::complex<double> get_c(std::istream& in) {
  const double re = get_f64(in);
  return {re, get_f64(in)};
}

struct Header {
  std::uint32_t kind, mr, mt;
  std::uint64_t n;
  double rate;
  Toa start;
  double noise;
};

void put_header(std::ostream& out, const Header& h) {
  out.write(kMagic.data(), kMagic.size());
  put(out, kDumpVersion);
  put(out, h.kind);
  put(out, h.mr);
  put(out, h.mt);
  put(out, h.n);
  put_f64(out, h.rate);
  put(out, static_cast<std::uint64_t>(h.start.count()));
  put_f64(out, h.noise);
}

Header get_header(std::istream& in, std::uint32_t expected_kind) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw SensingError(ErrorKind::io, "not a signal dump (bad magic)");
  if (const auto v = get<std::uint32_t>(in); v != kDumpVersion)
    throw SensingError(ErrorKind::io, "unsupported dump version " + std::to_string(v));
  Header h{};
  h.kind = get<std::uint32_t>(in);
  if (h.kind != expected_kind)
    throw SensingError(ErrorKind::io, "dump holds kind " + std::to_string(h.kind) + ", expected " +
                                          std::to_string(expected_kind));
  h.mr = get<std::uint32_t>(in);
  h.mt = get<std::uint32_t>(in);
  h.n = get<std::uint64_t>(in);
  h.rate = get_f64(in);
  h.start = Toa(static_cast<std::int64_t>(get<std::uint64_t>(in)));
  h.noise = get_f64(in);
  return h;
}

template <class F>
void with_file(const std::filesystem::path& path, std::ios::openmode mode, F&& f) {
  std::fstream file(path, mode | std::ios::binary);
  if (!file) throw SensingError(ErrorKind::io, "cannot open " + path.string());
  f(file);
  if (mode & std::ios::out) {
    file.flush();
    if (!file) throw SensingError(ErrorKind::io, "write failed: " + path.string());
  }
}

}  // namespace

void write_signal(std::ostream& out, const signal::ReceivedSignal& rx) {
  put_header(out, {kSignal, static_cast<std::uint32_t>(rx.samples.rows()), 0,
                   static_cast<std::uint64_t>(rx.samples.cols()), rx.sample_rate, rx.start_time,
                   rx.noise_power});
  for (Eigen::Index i = 0; i < rx.samples.rows(); ++i)
    for (Eigen::Index t = 0; t < rx.samples.cols(); ++t) put_c(out, rx.samples(i, t));
}

signal::ReceivedSignal read_signal(std::istream& in) {
  const Header h = get_header(in, kSignal);
  signal::ReceivedSignal rx;
  rx.samples.resize(h.mr, static_cast<Eigen::Index>(h.n));
  for (Eigen::Index i = 0; i < rx.samples.rows(); ++i)
    for (Eigen::Index t = 0; t < rx.samples.cols(); ++t) rx.samples(i, t) = get_c(in);
  rx.sample_rate = h.rate;
  rx.start_time = h.start;
  rx.noise_power = h.noise;
  return rx;
}

void write_bank(std::ostream& out, const signal::MatchedFilterBank& bank) {
  const auto mr = bank.y.empty() ? 0 : bank.y.front().rows();
  const auto mt = bank.y.empty() ? 0 : bank.y.front().cols();
  put_header(out, {kBank, static_cast<std::uint32_t>(mr), static_cast<std::uint32_t>(mt),
                   bank.y.size(), bank.sample_rate, bank.start_time, 0.0});
  for (const auto& y : bank.y)
    for (Eigen::Index i = 0; i < mr; ++i)
      for (Eigen::Index j = 0; j < mt; ++j) put_c(out, y(i, j));
}

signal::MatchedFilterBank read_bank(std::istream& in) {
  const Header h = get_header(in, kBank);
  signal::MatchedFilterBank bank;
  bank.sample_rate = h.rate;
  bank.start_time = h.start;
  bank.y.assign(h.n, Eigen::MatrixXcd(h.mr, h.mt));
  for (auto& y : bank.y)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) = get_c(in);
  return bank;
}

void save_signal(const std::filesystem::path& path, const signal::ReceivedSignal& rx) {
  with_file(path, std::ios::out | std::ios::trunc, [&](auto& f) { write_signal(f, rx); });
}
signal::ReceivedSignal load_signal(const std::filesystem::path& path) {
  signal::ReceivedSignal rx;
  with_file(path, std::ios::in, [&](auto& f) { rx = read_signal(f); });
  return rx;
}
void save_bank(const std::filesystem::path& path, const signal::MatchedFilterBank& bank) {
  with_file(path, std::ios::out | std::ios::trunc, [&](auto& f) { write_bank(f, bank); });
}
signal::MatchedFilterBank load_bank(const std::filesystem::path& path) {
  signal::MatchedFilterBank bank;
  with_file(path, std::ios::in, [&](auto& f) { bank = read_bank(f); });
  return bank;
}

}  // namespace hvsense::io

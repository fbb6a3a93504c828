// SPDX-License-Identifier: Apache-2.0
//
// Binary dumps of received signals and matched-filter banks. Every field is
// little-endian regardless of host:
//
//   offset  size  field
//   0       4     magic "HVRX"
//   4       4     u32 format version (1)
//   8       4     u32 kind: 0 received signal, 1 matched-filter bank
//   12      4     u32 M_r
//   16      4     u32 M_t (0 for a received signal)
//   20      8     u64 N: samples (signal) or lags (bank)
//   28      8     f64 sample rate, Hz
//   36      8     i64 start time, attoseconds
//   44      8     f64 noise power (signal) or 0
//   52      ...   payload of (re, im) f64 pairs
//
// Signal payload is row-major over (antenna, sample); bank payload is ordered
// by lag, then rx antenna, then tx antenna.
#pragma once

#include <filesystem>
#include <iosfwd>

#include "hvsense/signal.hpp"

namespace hvsense::io {

inline constexpr std::uint32_t kDumpVersion = 1;

void write_signal(std::ostream& out, const signal::ReceivedSignal& rx);
signal::ReceivedSignal read_signal(std::istream& in);

void write_bank(std::ostream& out, const signal::MatchedFilterBank& bank);
signal::MatchedFilterBank read_bank(std::istream& in);

void save_signal(const std::filesystem::path& path, const signal::ReceivedSignal& rx);
signal::ReceivedSignal load_signal(const std::filesystem::path& path);
void save_bank(const std::filesystem::path& path, const signal::MatchedFilterBank& bank);
signal::MatchedFilterBank load_bank(const std::filesystem::path& path);

}  // namespace hvsense::io

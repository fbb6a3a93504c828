// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hvsense {

enum class ErrorKind {
  degenerate_geometry,
  insufficient_paths,
  infeasible,
  rank_deficient,
  empty_null_space,
  no_consistent_orientation,
  unobservable_dimension,
  impossible_orthogonality,
  configuration,
  empty_scene,
  io,
};

const char* to_string(ErrorKind kind);

// Every failure the library reports carries a kind so callers (the Monte Carlo
// driver in particular) can record it as a failed trial instead of aborting.
class SensingError : public std::runtime_error {
public:
  SensingError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace hvsense

// SPDX-License-Identifier: Apache-2.0
#include "hvsense/errors.hpp"

namespace hvsense {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::degenerate_geometry: return "degenerate_geometry";
    case ErrorKind::insufficient_paths: return "insufficient_paths";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::rank_deficient: return "rank_deficient";
    case ErrorKind::empty_null_space: return "empty_null_space";
    case ErrorKind::no_consistent_orientation: return "no_consistent_orientation";
    case ErrorKind::unobservable_dimension: return "unobservable_dimension";
    case ErrorKind::impossible_orthogonality: return "impossible_orthogonality";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::empty_scene: return "empty_scene";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace hvsense

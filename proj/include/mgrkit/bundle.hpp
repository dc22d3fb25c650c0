#pragma once

#include <string>
#include <vector>

#include "mgrkit/mgr.hpp"
#include "mgrkit/types.hpp"

namespace mgrkit {

/// On-disk problem instance: matrix.mtx, rhs.mtx, labels.json, meta.json.
struct ProblemBundle {
  SpMat matrix;
  Vec rhs;
  DofPartition partition;
  std::vector<int> unknown_map;   ///< empty when no per-dof component ids apply
  std::vector<Index> well_rows;   ///< original row indices of well equations
  std::vector<std::string> warnings;
  std::string problem;            ///< generator id ("mfd", "comp", "frac", ...)
  std::string params_json;        ///< generator parameters, verbatim JSON object
};

void write_bundle(const ProblemBundle& bundle, const std::string& dir);

/// Fails with a descriptive error when files are missing or inconsistent
/// (label count vs matrix size, rhs length, out-of-range label ids).
ProblemBundle read_bundle(const std::string& dir);

}  // namespace mgrkit

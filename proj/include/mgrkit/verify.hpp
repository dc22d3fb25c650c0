/// @file verify.hpp
/// @brief Self-contained acceptance checks: each one builds its own systems,
/// runs the relevant solver path, and reports pass/fail with a measurement
/// summary. The CLI's verify command and the acceptance test both run these.
#pragma once

#include <string>
#include <vector>

namespace mgrkit::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  ///< measured numbers behind the verdict
  double seconds = 0.0;
};

struct VerifyOptions {
  /// Perturb a reduction-level interpolation operator by one percent before
  /// the exactness check runs; the check must then fail. Exercises the
  /// oracle's ability to notice a corrupted transfer.
  bool corrupt_transfer = false;
};

std::vector<CheckResult> run_acceptance_checks(const VerifyOptions& opts = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace mgrkit::verify

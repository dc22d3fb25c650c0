/// @file krylov.hpp
/// @brief Right-preconditioned restarted GMRES with residual-history reporting.
#pragma once

#include <functional>

#include "mgrkit/types.hpp"

namespace mgrkit {

/// Linear operator v -> M(v); identity when empty.
using LinOp = std::function<Vec(const Vec&)>;

struct KrylovConfig {
  Index restart = 50;
  Index max_iters = 500;
  Real rel_tol = 1e-7;
  Real abs_tol = 0.0;
};

struct SolveReport {
  bool converged = false;
  Index iterations = 0;  // total inner steps
  Real final_residual = 0.0;  // true relative residual ||b - A x|| / ||b||
  /// Arnoldi residual estimate per inner step; the true relative residual is
  /// appended after each restart and at convergence.
  std::vector<Real> residual_history;
};

/// Solve A M^{-1} y = b, x = M^{-1} y. `x` supplies the initial guess (pass a
/// zero vector for the default) and receives the solution. Convergence is
/// declared only after the true residual confirms the Arnoldi estimate.
SolveReport gmres(const SpMat& A, const Vec& b, Vec& x, const KrylovConfig& cfg,
                  const LinOp& preconditioner = {});

/// gmres on a matrix-free operator (same semantics).
SolveReport gmres_op(const LinOp& A, Index n, const Vec& b, Vec& x, const KrylovConfig& cfg,
                     const LinOp& preconditioner = {});

}  // namespace mgrkit

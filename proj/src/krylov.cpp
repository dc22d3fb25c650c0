#include "mgrkit/krylov.hpp"

#include <cmath>
#include <stdexcept>

namespace mgrkit {
namespace {

/// Apply the Givens rotations accumulated so far, then form a new rotation
/// that annihilates H(k+1, k).
void apply_and_update_givens(Mat& H, std::vector<Real>& cs, std::vector<Real>& sn, Vec& g,
                             Index k) {
  for (Index i = 0; i < k; ++i) {
    const Real t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
    H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
    H(i, k) = t;
  }
  const Real a = H(k, k);
  const Real b = H(k + 1, k);
  const Real r = std::hypot(a, b);
  if (r == 0.0) {
    cs[k] = 1.0;
    sn[k] = 0.0;
  } else {
    cs[k] = a / r;
    sn[k] = b / r;
  }
  H(k, k) = r;
  H(k + 1, k) = 0.0;
  const Real t = cs[k] * g[k];
  g[k + 1] = -sn[k] * g[k];
  g[k] = t;
}

}  // namespace

SolveReport gmres_op(const LinOp& A, Index n, const Vec& b, Vec& x, const KrylovConfig& cfg,
                     const LinOp& preconditioner) {
  if (b.size() != n) throw std::invalid_argument("gmres: rhs size mismatch");
  if (x.size() != n) throw std::invalid_argument("gmres: initial guess size mismatch");
  if (cfg.restart < 1) throw std::invalid_argument("gmres: restart must be >= 1");
  if (!b.allFinite()) throw std::runtime_error("gmres: rhs contains non-finite entries");

  SolveReport rep;
  const Real bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    rep.converged = true;
    rep.final_residual = 0.0;
    return rep;
  }
  const Real target = std::max(cfg.rel_tol * bnorm, cfg.abs_tol);

  const auto precond = [&](const Vec& v) -> Vec { return preconditioner ? preconditioner(v) : v; };

  const Index m = cfg.restart;
  Mat V(n, m + 1);
  Mat H = Mat::Zero(m + 1, m);
  std::vector<Real> cs(m, 0.0), sn(m, 0.0);
  Vec g(m + 1);

  while (rep.iterations < cfg.max_iters) {
    Vec r = b - A(x);
    Real rnorm = r.norm();
    if (!std::isfinite(rnorm)) throw std::runtime_error("gmres: residual is non-finite");
    if (rnorm <= target) {
      rep.converged = true;
      rep.final_residual = rnorm / bnorm;
      rep.residual_history.push_back(rep.final_residual);
      return rep;
    }

    V.col(0) = r / rnorm;
    g.setZero();
    g[0] = rnorm;

    Index k = 0;
    bool breakdown = false;
    for (; k < m && rep.iterations < cfg.max_iters; ++k) {
      Vec w = A(precond(V.col(k)));
      // Modified Gram-Schmidt, with one re-orthogonalization pass when the
      // norm drops by more than 1/sqrt(2) (a standard loss-of-orthogonality
      // proxy).
      const Real wnorm0 = w.norm();
      for (Index i = 0; i <= k; ++i) {
        const Real h = V.col(i).dot(w);
        H(i, k) = h;
        w -= h * V.col(i);
      }
      if (w.norm() < wnorm0 / std::sqrt(2.0)) {
        for (Index i = 0; i <= k; ++i) {
          const Real h = V.col(i).dot(w);
          H(i, k) += h;
          w -= h * V.col(i);
        }
      }
      H(k + 1, k) = w.norm();
      if (!std::isfinite(H(k + 1, k))) throw std::runtime_error("gmres: Arnoldi vector is non-finite");

      const bool happy = H(k + 1, k) < 1e-300;
      if (!happy) V.col(k + 1) = w / H(k + 1, k);

      apply_and_update_givens(H, cs, sn, g, k);
      ++rep.iterations;
      const Real est = std::abs(g[k + 1]);
      rep.residual_history.push_back(est / bnorm);

      if (happy) {
        breakdown = true;
        ++k;
        break;
      }
      if (est <= target) {
        ++k;
        break;
      }
    }

    // Solve the upper-triangular least-squares system and update x. A happy
    // breakdown on a singular operator can leave a zero trailing pivot; those
    // columns carry no reachable correction and are dropped.
    Index keff = k;
    while (keff > 0 && std::abs(H(keff - 1, keff - 1)) < 1e-300) --keff;
    if (keff > 0) {
      Vec y = H.topLeftCorner(keff, keff).triangularView<Eigen::Upper>().solve(g.head(keff));
      Vec update = V.leftCols(keff) * y;
      x += precond(update);
    }

    Vec rtrue = b - A(x);
    const Real tn = rtrue.norm();
    if (!std::isfinite(tn)) throw std::runtime_error("gmres: residual is non-finite");
    rep.residual_history.push_back(tn / bnorm);
    if (tn <= target) {
      rep.converged = true;
      rep.final_residual = tn / bnorm;
      return rep;
    }
    if (breakdown) {
      // Krylov space is exhausted but the true residual still misses the
      // tolerance: no further progress is possible.
      throw std::runtime_error("gmres: Arnoldi breakdown before reaching tolerance");
    }
    rep.final_residual = tn / bnorm;
  }
  return rep;
}

SolveReport gmres(const SpMat& A, const Vec& b, Vec& x, const KrylovConfig& cfg,
                  const LinOp& preconditioner) {
  if (A.rows() != A.cols()) throw std::invalid_argument("gmres: matrix must be square");
  const LinOp op = [&A](const Vec& v) -> Vec { return A * v; };
  return gmres_op(op, A.rows(), b, x, cfg, preconditioner);
}

}  // namespace mgrkit

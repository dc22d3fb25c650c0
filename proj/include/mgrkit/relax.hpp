/// @file relax.hpp
/// @brief Stationary smoothers: Jacobi, L1 variants, exact block solves.
///
/// A BoundSmoother is always applied in correction form: given a residual r it
/// returns an approximate solution of A z = r starting from z = 0, so every
/// smoother is a fixed linear operator for a fixed matrix.
#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "mgrkit/sparse.hpp"
#include "mgrkit/types.hpp"

namespace mgrkit {

struct AmgConfig;
class AmgHierarchy;

enum class SmootherKind {
  jacobi,
  l1_jacobi,
  hybrid_l1_gs_forward,
  hybrid_l1_gs_backward,
  block_jacobi_exact,
  amg_vcycle,
  dense_lu,
};

/// Contiguous index ranges [begin, end) that tile [0, n).
using Partition = std::vector<std::pair<Index, Index>>;

struct SmootherSpec {
  SmootherKind kind = SmootherKind::jacobi;
  Index sweeps = 1;
  Real weight = 1.0;  // Jacobi damping, must lie in (0, 2)
  std::vector<Index> block_sizes;  // block_jacobi_exact only
  Partition partition;             // hybrid L1 smoothers; empty = one range
  std::shared_ptr<const AmgConfig> amg;  // amg_vcycle only; null = defaults
  bool use_unknown_map = false;  // amg_vcycle: adopt the caller's unknown map
};

/// L1 diagonal d_i = a_ii + sum of |a_ij| over j outside i's own range.
/// With singleton ranges this is the full L1-Jacobi diagonal.
Vec l1_diagonal(const SpMat& A, const Partition& partition);

/// x <- x + weight * D^{-1} (b - A x). Throws on zero diagonal.
void jacobi_sweep(const SpMat& A, const Vec& b, Vec& x, Real weight = 1.0);

/// One hybrid L1-Gauss-Seidel sweep: Gauss-Seidel ordering inside each
/// partition range, Jacobi (snapshot) values across ranges, diagonal replaced
/// by the L1 diagonal `l1d`.
void hybrid_l1_gs_sweep(const SpMat& A, const Vec& l1d, const Vec& b, Vec& x, bool forward,
                        const Partition& partition);
/// Same, computing the L1 diagonal internally (empty partition = one range).
void hybrid_l1_gs_sweep(const SpMat& A, const Vec& b, Vec& x, bool forward,
                        const Partition& partition = {});

/// z = blockdiag(A_k)^{-1} r, blocks taken from `layout`.
Vec block_jacobi_exact_apply(const SpMat& A, const BlockLayout& layout, const Vec& r);

/// A smoother specialised to one matrix: factorizations and scaled diagonals
/// are precomputed at bind time.
class BoundSmoother {
 public:
  BoundSmoother() = default;

  /// `unknown_map` is consulted only by amg_vcycle specs with
  /// use_unknown_map set; it may be null otherwise.
  static BoundSmoother bind(const SmootherSpec& spec, const SpMat& A,
                            const std::vector<int>* unknown_map = nullptr);

  /// Approximate A^{-1} r in correction form (zero initial guess, then
  /// `sweeps` sweeps).
  Vec apply(const Vec& r) const;

  bool bound() const { return static_cast<bool>(A_); }
  const SmootherSpec& spec() const { return spec_; }
  /// Present only for amg_vcycle smoothers.
  const AmgHierarchy* amg_hierarchy() const { return amg_.get(); }

 private:
  SmootherSpec spec_;
  std::shared_ptr<const SpMat> A_;
  Partition partition_;  // normalized (never empty once bound)
  Vec dinv_;             // jacobi / l1_jacobi: reciprocal working diagonal
  Vec l1d_;              // hybrid kinds
  std::shared_ptr<BlockDiagonalLU> block_lu_;
  std::shared_ptr<DenseLU> dense_lu_;
  std::shared_ptr<AmgHierarchy> amg_;
};

}  // namespace mgrkit

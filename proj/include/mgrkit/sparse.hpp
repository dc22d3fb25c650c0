/// @file sparse.hpp
/// @brief Sparse/dense kernels: CSR helpers, block extraction, dense LU.
#pragma once

#include <optional>

#include <Eigen/LU>

#include "mgrkit/types.hpp"

namespace mgrkit {

/// Build a compressed CSR matrix from triplets; duplicate entries are summed.
SpMat from_triplets(Index nrows, Index ncols, const std::vector<Triplet>& entries);

/// Identity matrix of size n.
SpMat sparse_identity(Index n);

/// Check CSR invariants: monotone offsets, strictly increasing in-row column
/// indices, in-range indices, no stored NaN/Inf. Throws on violation.
void validate(const SpMat& A);

/// Exact sparse product A·B. Numerically zero fill produced by cancellation is
/// kept unless drop_tol > 0 (entries with |v| <= drop_tol removed afterwards).
SpMat matmul(const SpMat& A, const SpMat& B, Real drop_tol = 0.0);

/// Submatrix A(rows, cols) reindexed to the order of the given index sets.
SpMat extract(const SpMat& A, const IndexList& rows, const IndexList& cols);

/// Sorted complement of `subset` within [0, n).
IndexList complement(Index n, const IndexList& subset);

/// Diagonal of A as a vector; missing entries are zero.
Vec diagonal(const SpMat& A);

/// Entrywise inverted diagonal 1/a_ii. Throws naming the row when a diagonal
/// entry is absent or zero (the failure a constraint row with zero diagonal
/// triggers when handed to a diagonal smoother).
Vec diag_inverse(const SpMat& A);

/// Diagonal matrix from a vector.
SpMat diag_matrix(const Vec& d);

/// Largest absolute stored value, 0 for empty matrices.
Real max_abs(const SpMat& A);

/// True when every stored entry lies on the diagonal.
bool is_structurally_diagonal(const SpMat& A);

/// y = A x with an explicit dimension check (Eigen would assert).
Vec spmv(const SpMat& A, const Vec& x);

/// Compressed row-major transpose.
SpMat transpose(const SpMat& A);

/// Dense LU with partial pivoting. Pivot magnitudes below the threshold are
/// treated as singular.
class DenseLU {
 public:
  DenseLU() = default;
  explicit DenseLU(const Mat& A, Real pivot_tol = 1e-300);

  Vec solve(const Vec& b) const;
  Mat solve(const Mat& B) const;
  Index size() const { return n_; }

 private:
  Eigen::PartialPivLU<Mat> lu_;
  Index n_ = 0;
};

/// Densify a sparse matrix and factor it.
DenseLU factor_dense(const SpMat& A, Real pivot_tol = 1e-300);

/// One-shot sparse direct solve (supernodal LU with column reordering).
/// Reserved for generators and reference oracles, not the solver path.
Vec direct_solve(const SpMat& A, const Vec& b);

/// Contiguous block layout ([starts, ends) pairs covering [0, n)).
struct BlockLayout {
  std::vector<Index> starts;  // size nblocks+1, starts[0]=0, starts.back()=n

  Index blocks() const { return static_cast<Index>(starts.size()) - 1; }
  static BlockLayout from_sizes(const std::vector<Index>& sizes);
};

/// Per-block dense LU of a block-diagonal matrix.
class BlockDiagonalLU {
 public:
  BlockDiagonalLU() = default;
  BlockDiagonalLU(const SpMat& A, const BlockLayout& layout);

  /// z = blockdiag(A_k)^{-1} r.
  Vec solve(const Vec& r) const;
  /// X = blockdiag(A_k)^{-1} B for sparse B, touching only blocks that carry
  /// nonzeros in each column.
  SpMat solve_columns(const SpMat& B) const;
  Index size() const { return n_; }

 private:
  std::vector<DenseLU> blocks_;
  BlockLayout layout_;
  Index n_ = 0;
};

}  // namespace mgrkit

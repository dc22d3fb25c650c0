#include "mgrkit/sparse.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SparseLU>

namespace mgrkit {

SpMat from_triplets(Index nrows, Index ncols, const std::vector<Triplet>& entries) {
  SpMat A(nrows, ncols);
  A.setFromTriplets(entries.begin(), entries.end());
  A.makeCompressed();
  return A;
}

SpMat sparse_identity(Index n) {
  SpMat I(n, n);
  I.setIdentity();
  I.makeCompressed();
  return I;
}

void validate(const SpMat& A) {
  if (!A.isCompressed()) throw std::runtime_error("sparse matrix not compressed");
  const Index* offsets = A.outerIndexPtr();
  const Index* cols = A.innerIndexPtr();
  const Real* vals = A.valuePtr();
  if (offsets[0] != 0) throw std::runtime_error("row_offsets[0] != 0");
  for (Index i = 0; i < A.rows(); ++i) {
    if (offsets[i + 1] < offsets[i]) throw std::runtime_error("row_offsets not nondecreasing");
    Index prev = -1;
    for (Index k = offsets[i]; k < offsets[i + 1]; ++k) {
      if (cols[k] <= prev) throw std::runtime_error("column indices not strictly increasing in row " + std::to_string(i));
      if (cols[k] < 0 || cols[k] >= A.cols()) throw std::runtime_error("column index out of range in row " + std::to_string(i));
      if (!std::isfinite(vals[k])) throw std::runtime_error("non-finite value stored in row " + std::to_string(i));
      prev = cols[k];
    }
  }
  if (offsets[A.rows()] != A.nonZeros()) throw std::runtime_error("row_offsets end != nnz");
}

SpMat matmul(const SpMat& A, const SpMat& B, Real drop_tol) {
  if (A.cols() != B.rows()) throw std::runtime_error("matmul: dimension mismatch");
  SpMat C = A * B;
  if (drop_tol > 0.0) C.prune([drop_tol](Index, Index, Real v) { return std::abs(v) > drop_tol; });
  C.makeCompressed();
  return C;
}

SpMat extract(const SpMat& A, const IndexList& rows, const IndexList& cols) {
  // col_map[j] = position of j in cols, or -1.
  std::vector<Index> col_map(A.cols(), -1);
  for (size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= A.cols()) throw std::runtime_error("extract: column index out of range");
    col_map[cols[j]] = static_cast<Index>(j);
  }
  std::vector<Triplet> ts;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= A.rows()) throw std::runtime_error("extract: row index out of range");
    for (SpMat::InnerIterator it(A, rows[i]); it; ++it) {
      Index jj = col_map[it.col()];
      if (jj >= 0) ts.emplace_back(static_cast<Index>(i), jj, it.value());
    }
  }
  return from_triplets(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()), ts);
}

IndexList complement(Index n, const IndexList& subset) {
  std::vector<bool> in(n, false);
  for (Index i : subset) in[i] = true;
  IndexList out;
  out.reserve(n - subset.size());
  for (Index i = 0; i < n; ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

Vec diagonal(const SpMat& A) {
  Vec d = Vec::Zero(A.rows());
  for (Index i = 0; i < A.rows(); ++i)
    for (SpMat::InnerIterator it(A, i); it; ++it)
      if (it.col() == i) d[i] = it.value();
  return d;
}

Vec diag_inverse(const SpMat& A) {
  if (A.rows() != A.cols()) throw std::runtime_error("diag_inverse: matrix not square");
  Vec d = Vec::Zero(A.rows());
  std::vector<bool> present(A.rows(), false);
  for (Index i = 0; i < A.rows(); ++i) {
    for (SpMat::InnerIterator it(A, i); it; ++it) {
      if (it.col() == i) {
        present[i] = true;
        d[i] = it.value();
      }
    }
  }
  for (Index i = 0; i < A.rows(); ++i) {
    if (!present[i]) throw std::runtime_error("diag_inverse: missing diagonal entry at row " + std::to_string(i));
    if (d[i] == 0.0) throw std::runtime_error("diag_inverse: zero diagonal entry at row " + std::to_string(i));
  }
  return d.cwiseInverse();
}

SpMat diag_matrix(const Vec& d) {
  std::vector<Triplet> ts;
  ts.reserve(d.size());
  for (Index i = 0; i < d.size(); ++i) ts.emplace_back(i, i, d[i]);
  return from_triplets(static_cast<Index>(d.size()), static_cast<Index>(d.size()), ts);
}

Real max_abs(const SpMat& A) {
  Real m = 0.0;
  for (Index k = 0; k < A.nonZeros(); ++k) m = std::max(m, std::abs(A.valuePtr()[k]));
  return m;
}

bool is_structurally_diagonal(const SpMat& A) {
  for (Index i = 0; i < A.rows(); ++i)
    for (SpMat::InnerIterator it(A, i); it; ++it)
      if (it.col() != i) return false;
  return true;
}

Vec spmv(const SpMat& A, const Vec& x) {
  if (x.size() != A.cols()) throw std::invalid_argument("spmv: dimension mismatch");
  return A * x;
}

SpMat transpose(const SpMat& A) {
  SpMat T = SpMat(A.transpose());
  T.makeCompressed();
  return T;
}

DenseLU::DenseLU(const Mat& A, Real pivot_tol) : lu_(A), n_(static_cast<Index>(A.rows())) {
  if (A.rows() != A.cols()) throw std::runtime_error("dense LU: matrix not square");
  Vec u = lu_.matrixLU().diagonal();
  for (Index i = 0; i < n_; ++i)
    if (std::abs(u[i]) < pivot_tol)
      throw std::runtime_error("dense LU: matrix numerically singular (pivot " + std::to_string(i) + ")");
}

Vec DenseLU::solve(const Vec& b) const {
  if (b.size() != n_) throw std::runtime_error("dense LU solve: dimension mismatch");
  return lu_.solve(b);
}

Mat DenseLU::solve(const Mat& B) const {
  if (B.rows() != n_) throw std::runtime_error("dense LU solve: dimension mismatch");
  return lu_.solve(B);
}

DenseLU factor_dense(const SpMat& A, Real pivot_tol) {
  return DenseLU(Mat(A), pivot_tol);
}

BlockLayout BlockLayout::from_sizes(const std::vector<Index>& sizes) {
  BlockLayout layout;
  layout.starts.resize(sizes.size() + 1);
  layout.starts[0] = 0;
  for (size_t k = 0; k < sizes.size(); ++k) layout.starts[k + 1] = layout.starts[k] + sizes[k];
  return layout;
}

BlockDiagonalLU::BlockDiagonalLU(const SpMat& A, const BlockLayout& layout)
    : layout_(layout), n_(static_cast<Index>(A.rows())) {
  if (layout.starts.empty() || layout.starts.back() != n_)
    throw std::runtime_error("block layout does not cover the matrix");
  blocks_.reserve(layout.blocks());
  for (Index k = 0; k < layout.blocks(); ++k) {
    Index lo = layout.starts[k], hi = layout.starts[k + 1];
    Mat block = Mat::Zero(hi - lo, hi - lo);
    for (Index i = lo; i < hi; ++i) {
      for (SpMat::InnerIterator it(A, i); it; ++it) {
        if (it.col() >= lo && it.col() < hi) block(i - lo, it.col() - lo) = it.value();
      }
    }
    try {
      blocks_.emplace_back(block);
    } catch (const std::exception&) {
      throw std::runtime_error("block Jacobi: singular block " + std::to_string(k));
    }
  }
}

Vec BlockDiagonalLU::solve(const Vec& r) const {
  if (r.size() != n_) throw std::runtime_error("block solve: dimension mismatch");
  Vec z(n_);
  for (Index k = 0; k < layout_.blocks(); ++k) {
    Index lo = layout_.starts[k], hi = layout_.starts[k + 1];
    z.segment(lo, hi - lo) = blocks_[k].solve(Vec(r.segment(lo, hi - lo)));
  }
  return z;
}

SpMat BlockDiagonalLU::solve_columns(const SpMat& B) const {
  if (B.rows() != n_) throw std::runtime_error("block solve: dimension mismatch");
  Eigen::SparseMatrix<Real, Eigen::ColMajor, Index> Bc(B);
  std::vector<Index> block_of_row(n_);
  for (Index k = 0; k < layout_.blocks(); ++k)
    for (Index i = layout_.starts[k]; i < layout_.starts[k + 1]; ++i) block_of_row[i] = k;

  std::vector<Triplet> out;
  using ColIt = Eigen::SparseMatrix<Real, Eigen::ColMajor, Index>::InnerIterator;
  for (Index c = 0; c < Bc.cols(); ++c) {
    std::vector<std::pair<Index, Vec>> touched;  // block id -> gathered rhs
    for (ColIt it(Bc, c); it; ++it) {
      const Index k = block_of_row[it.row()];
      if (touched.empty() || touched.back().first != k)
        touched.push_back({k, Vec::Zero(layout_.starts[k + 1] - layout_.starts[k])});
      touched.back().second[it.row() - layout_.starts[k]] = it.value();
    }
    for (auto& [k, rhs] : touched) {
      const Vec x = blocks_[k].solve(rhs);
      const Index lo = layout_.starts[k];
      for (Index i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) out.push_back({lo + i, c, x[i]});
    }
  }
  return from_triplets(n_, static_cast<Index>(Bc.cols()), out);
}

Vec direct_solve(const SpMat& A, const Vec& b) {
  if (A.rows() != A.cols()) throw std::runtime_error("direct_solve: matrix must be square");
  if (b.size() != A.rows()) throw std::runtime_error("direct_solve: dimension mismatch");
  Eigen::SparseMatrix<Real, Eigen::ColMajor, Index> Ac(A);
  Eigen::SparseLU<Eigen::SparseMatrix<Real, Eigen::ColMajor, Index>> lu;
  lu.compute(Ac);
  if (lu.info() != Eigen::Success) throw std::runtime_error("direct_solve: factorization failed");
  Vec x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw std::runtime_error("direct_solve: solve failed");
  return x;
}

}  // namespace mgrkit

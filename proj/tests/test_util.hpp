/// Shared helpers for the test binaries: small matrix builders and RNG fills.
#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mgrkit/sparse.hpp"
#include "mgrkit/types.hpp"

namespace testutil {

using namespace mgrkit;

inline SpMat dense_to_sparse(const Mat& M) {
  SpMat A = M.sparseView();
  A.makeCompressed();
  return A;
}

inline Mat to_dense(const SpMat& A) { return Mat(A); }

/// Bitwise structural and numerical equality.
inline bool same_matrix(const SpMat& A, const SpMat& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols() || A.nonZeros() != B.nonZeros()) return false;
  for (Index i = 0; i <= A.rows(); ++i)
    if (A.outerIndexPtr()[i] != B.outerIndexPtr()[i]) return false;
  for (Index k = 0; k < A.nonZeros(); ++k) {
    if (A.innerIndexPtr()[k] != B.innerIndexPtr()[k]) return false;
    if (A.valuePtr()[k] != B.valuePtr()[k]) return false;
  }
  return true;
}

inline SpMat tridiag(Index n, Real lo, Real di, Real up) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    if (i > 0) t.push_back({i, i - 1, lo});
    t.push_back({i, i, di});
    if (i + 1 < n) t.push_back({i, i + 1, up});
  }
  return from_triplets(n, n, t);
}

/// 5-point Laplacian on an nx-by-ny grid (Dirichlet, h=1).
inline SpMat laplace2d(Index nx, Index ny) {
  const auto id = [nx](Index i, Index j) { return j * nx + i; };
  std::vector<Triplet> t;
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      t.push_back({id(i, j), id(i, j), 4.0});
      if (i > 0) t.push_back({id(i, j), id(i - 1, j), -1.0});
      if (i + 1 < nx) t.push_back({id(i, j), id(i + 1, j), -1.0});
      if (j > 0) t.push_back({id(i, j), id(i, j - 1), -1.0});
      if (j + 1 < ny) t.push_back({id(i, j), id(i, j + 1), -1.0});
    }
  }
  return from_triplets(nx * ny, nx * ny, t);
}

/// Anisotropic 5-point stencil: -1 couplings in x, -eps in y.
inline SpMat laplace2d_aniso(Index nx, Index ny, Real eps) {
  const auto id = [nx](Index i, Index j) { return j * nx + i; };
  std::vector<Triplet> t;
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      t.push_back({id(i, j), id(i, j), 2.0 + 2.0 * eps});
      if (i > 0) t.push_back({id(i, j), id(i - 1, j), -1.0});
      if (i + 1 < nx) t.push_back({id(i, j), id(i + 1, j), -1.0});
      if (j > 0) t.push_back({id(i, j), id(i, j - 1), -eps});
      if (j + 1 < ny) t.push_back({id(i, j), id(i, j + 1), -eps});
    }
  }
  return from_triplets(nx * ny, nx * ny, t);
}

inline Mat random_dense(std::mt19937& rng, Index r, Index c, Real lo = -1.0, Real hi = 1.0) {
  std::uniform_real_distribution<Real> dist(lo, hi);
  Mat M(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) M(i, j) = dist(rng);
  return M;
}

inline Vec random_vec(std::mt19937& rng, Index n, Real lo = -1.0, Real hi = 1.0) {
  std::uniform_real_distribution<Real> dist(lo, hi);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

/// Dense random matrix shifted to be comfortably nonsingular.
inline SpMat random_nonsingular(std::mt19937& rng, Index n) {
  Mat M = random_dense(rng, n, n);
  M += static_cast<Real>(n) * Mat::Identity(n, n);
  return dense_to_sparse(M);
}

/// Sparse random strictly diagonally dominant matrix with a uniform diagonal
/// (max row sum + 1), which also makes I - A D^{-1} an infinity-norm
/// contraction.
inline SpMat random_sdd(std::mt19937& rng, Index n, Index extras_per_row = 3) {
  std::uniform_real_distribution<Real> dist(-1.0, 1.0);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Triplet> t;
  std::vector<Real> rowsum(n, 0.0);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < extras_per_row; ++k) {
      Index j = pick(rng);
      if (j == i) continue;
      Real v = dist(rng);
      t.push_back({i, j, v});
    }
  }
  for (const Triplet& e : t) rowsum[e.row()] += std::abs(e.value());
  Real diag = 1.0;
  for (Index i = 0; i < n; ++i) diag = std::max(diag, rowsum[i] + 1.0);
  for (Index i = 0; i < n; ++i) t.push_back({i, i, diag});
  return from_triplets(n, n, t);
}

inline std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

/// Q4 plane-strain elasticity on an nx-by-ny element grid of square elements,
/// outer boundary clamped, dofs interleaved (ux, uy) over interior nodes.
/// Independent of the library's own finite-element assembly.
inline SpMat elasticity2d(Index nx, Index ny, Real E, Real nu, Real h,
                          std::vector<int>* unknown_map = nullptr) {
  const Real c = E / ((1.0 + nu) * (1.0 - 2.0 * nu));
  Mat D(3, 3);
  D << c * (1.0 - nu), c * nu, 0.0, c * nu, c * (1.0 - nu), 0.0, 0.0, 0.0,
      c * (1.0 - 2.0 * nu) / 2.0;

  // Element stiffness, 2x2 Gauss points on the reference square [-1,1]^2.
  Mat Ke = Mat::Zero(8, 8);
  const Real g = 1.0 / std::sqrt(3.0);
  for (Real xi : {-g, g}) {
    for (Real eta : {-g, g}) {
      // dN/dxi, dN/deta for nodes (-1,-1),(1,-1),(1,1),(-1,1).
      const Real dxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
      const Real det[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
      Mat B = Mat::Zero(3, 8);
      for (int a = 0; a < 4; ++a) {
        const Real dx = dxi[a] * 2.0 / h;  // J = h/2 * I
        const Real dy = det[a] * 2.0 / h;
        B(0, 2 * a) = dx;
        B(1, 2 * a + 1) = dy;
        B(2, 2 * a) = dy;
        B(2, 2 * a + 1) = dx;
      }
      Ke += B.transpose() * D * B * (h / 2.0) * (h / 2.0);
    }
  }

  const Index nnx = nx + 1, nny = ny + 1;
  const auto node = [nnx](Index i, Index j) { return j * nnx + i; };
  // Interior nodes only (clamped boundary).
  std::vector<Index> dof_of_node(nnx * nny, -1);
  Index ndof = 0;
  for (Index j = 1; j < nny - 1; ++j)
    for (Index i = 1; i < nnx - 1; ++i) dof_of_node[node(i, j)] = (ndof += 2) - 2;

  std::vector<Triplet> t;
  for (Index ej = 0; ej < ny; ++ej) {
    for (Index ei = 0; ei < nx; ++ei) {
      const Index nd[4] = {node(ei, ej), node(ei + 1, ej), node(ei + 1, ej + 1), node(ei, ej + 1)};
      for (int a = 0; a < 4; ++a) {
        if (dof_of_node[nd[a]] < 0) continue;
        for (int b = 0; b < 4; ++b) {
          if (dof_of_node[nd[b]] < 0) continue;
          for (int da = 0; da < 2; ++da)
            for (int db = 0; db < 2; ++db)
              t.push_back({dof_of_node[nd[a]] + da, dof_of_node[nd[b]] + db,
                           Ke(2 * a + da, 2 * b + db)});
        }
      }
    }
  }
  if (unknown_map != nullptr) {
    unknown_map->resize(ndof);
    for (Index k = 0; k < ndof; ++k) (*unknown_map)[k] = static_cast<int>(k % 2);
  }
  return from_triplets(ndof, ndof, t);
}

}  // namespace testutil

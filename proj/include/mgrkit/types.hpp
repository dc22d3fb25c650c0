/// @file types.hpp
/// @brief Core scalar/matrix typedefs shared by every module.
///
/// CSR is the single sparse format: row-major Eigen sparse matrices expose
/// row_offsets/col_indices/values directly through outer/inner/value pointers.
#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <cstdint>
#include <string>
#include <vector>

namespace mgrkit {

using Real = double;
using Index = int;

using SpMat = Eigen::SparseMatrix<Real, Eigen::RowMajor, Index>;
using Triplet = Eigen::Triplet<Real, Index>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;

/// Strictly increasing index set (C/F splittings, block selections).
using IndexList = std::vector<Index>;

}  // namespace mgrkit

/// @file matrix_market.hpp
/// @brief Matrix Market IO: coordinate format for matrices, array for vectors.
#pragma once

#include <string>

#include "mgrkit/types.hpp"

namespace mgrkit {

/// Read a real coordinate-format matrix (general or symmetric; symmetric
/// storage is expanded). Throws a parse error naming the offending line.
SpMat mm_read(const std::string& path);

/// Write in 1-based coordinate format, values with 17 significant digits so
/// doubles round-trip exactly.
void mm_write(const std::string& path, const SpMat& A);

/// Read a dense vector (array format, or a single-column coordinate matrix).
Vec mm_read_vector(const std::string& path);

/// Write a dense vector in array format.
void mm_write_vector(const std::string& path, const Vec& v);

}  // namespace mgrkit

/// @file comp.hpp
/// @brief Synthetic compositional-flow Jacobians: two component densities and
/// pressure on a 3D grid, coupled to multi-segment wells with algebraic
/// control rows, plus the staged reduction strategy that solves them.
#pragma once

#include <string>
#include <vector>

#include "mgrkit/bundle.hpp"
#include "mgrkit/mgr.hpp"
#include "mgrkit/sparse.hpp"
#include "mgrkit/types.hpp"

namespace mgrkit::comp {

enum class PermKind { uniform, lognormal };
enum class ControlKind { rate, pressure };

struct CompConfig {
  Index nx = 8, ny = 8, nz = 8;  ///< each >= 2
  Real dt = 1.0;
  PermKind perm = PermKind::lognormal;
  Real perm_sigma = 1.0;  ///< std of ln K for the lognormal field
  unsigned seed = 77;
  Real accumulation = 1.0;     ///< pressure-row storage diagonal
  Real advection_ratio = 1.0;  ///< max |off-diagonal| row sum over mass diagonal
  Real coupling = 0.1;         ///< pressure/density cross-block scale, relative
  /// Volume-constraint row diagonals; the self entry must stay nonzero.
  Real volume_p = 0.2;
  Real volume_rho1 = 0.3;
  Real volume_rho2 = 1.0;
  Index wells = 2;
  Index segments = 10;      ///< per well, >= 2
  Index perforations = 3;   ///< per well, on segments 1..perforations, <= nz
  ControlKind control = ControlKind::rate;
};

/// Assembled Jacobian-shaped system. Dof order: all cell pressures, then both
/// component densities cell-blocked, then well dofs segment-major with
/// (pressure, density 1, density 2, rate) inside each segment.
struct CompSystem {
  SpMat A;
  DofPartition partition;           ///< fields {p, rho1, rho2[, well]}
  std::vector<Index> well_rows;     ///< every well dof
  std::vector<Index> control_rows;  ///< one constraint row per well, zero diagonal
  Index n_cells = 0;
  Index well_dofs = 0;
};

/// Deterministic for a fixed config. Structural guarantees: the pressure
/// block is a 7-point operator with positive diagonal; the density-1 block is
/// mass diagonal plus first-order upwind advection on fluxes driven by the
/// assembled pressure operator; every volume-constraint block is strictly
/// diagonal; well blocks never couple across wells; each control row stores a
/// zero on its diagonal and couples only the controlled quantity.
CompSystem build_comp_system(const CompConfig& cfg);

/// Staged reduction: eliminate rho2 (exact, the constraint rows are
/// diagonal), then rho1, then pressure with an AMG V-cycle as F-relaxation.
/// With wells the remaining coarse grid is the well block, solved densely;
/// without wells the hierarchy stops at the pressure system and the coarse
/// solve is the AMG V-cycle itself. Well rows are never F-points before the
/// coarsest grid.
MgrStrategy strategy_compositional(bool has_wells = true);

/// CompSystem packaged with a seeded right-hand side and metadata.
ProblemBundle generate_bundle(const CompConfig& cfg);

}  // namespace mgrkit::comp

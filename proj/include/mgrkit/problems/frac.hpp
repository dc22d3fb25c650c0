/// @file frac.hpp
/// @brief Plane-strain block with a pressurized interior slit: bilinear-quad
/// elasticity coupled to a channel-flow pressure system on the slit cells,
/// plus the two reduction strategies that solve the coupled matrix.
#pragma once

#include <string>
#include <vector>

#include "mgrkit/bundle.hpp"
#include "mgrkit/mgr.hpp"
#include "mgrkit/sparse.hpp"
#include "mgrkit/types.hpp"

namespace mgrkit::frac {

struct FracConfig {
  Real domain = 1.0;  ///< side length of the square block, m
  /// Elements per side. ny must be even so the slit lies on a node row.
  Index nx = 64, ny = 64;
  Real young = 1e10;    ///< Pa
  Real poisson = 0.2;   ///< in (0, 0.5)
  Real viscosity = 0.01;  ///< fluid dynamic viscosity, Pa s
  Real bulk_fluid = 2e9;  ///< fluid bulk modulus, Pa
  /// Slit half-length as a fraction of the domain side; the slit is a
  /// horizontal line of element edges at mid-height, centered, and must stay
  /// strictly inside the block with at least two edges.
  Real half_length = 0.125;
  Real aperture0 = 1e-5;  ///< reference aperture the flux terms are frozen at, m
  Real dt = 1.0;          ///< s
  Real rho_fluid = 1000.0;  ///< kg/m^3
  /// Gravity magnitude acting in -y, m/s^2. Only the along-channel component
  /// drives fluid flux, and a horizontal slit has none, so this stays inert
  /// for the current geometry; the term is still assembled from geometry.
  Real gravity = 0.0;
  Index source_cell = -1;  ///< slit cell receiving injection; -1 = middle cell
  Real source_rate = 1.0;  ///< mass rate per unit thickness, kg/(s m)
};

/// Vertical-displacement dof ids bounding one slit cell. The slit is opened
/// by duplicating interior slit nodes; at a shared tip node top == bot and
/// the pair carries no jump.
struct FracCell {
  Index top_left, bot_left, top_right, bot_right;
};

/// Coupled system on dofs [u (interleaved x,y per free node) | p (slit cells)].
/// The displacement block is symmetric positive definite (outer boundary
/// fixed and eliminated); the pressure block is a storage diagonal plus a
/// channel-flow two-point Laplacian; the pressure column block loads the two
/// slit faces equally and oppositely, and the pressure row block is its
/// transpose scaled by -rho_fluid/dt (aperture rate entering storage).
struct FracSystem {
  SpMat A;
  DofPartition partition;        ///< fields {u, p}
  std::vector<int> unknown_map;  ///< displacement component per dof, 0 on p
  std::vector<FracCell> cells;   ///< one entry per slit pressure cell
  Index n_u = 0;
  Index n_p = 0;
};

FracSystem build_frac_system(const FracConfig& cfg);

/// Per-cell apertures of a solution vector: the mean vertical jump across the
/// cell's two node pairs.
Vec apertures(const FracSystem& sys, const Vec& x);

/// Reduce displacements first: one unknown-separated AMG V-cycle as the
/// F-solve, coarse grid on the slit pressures (diagonal-scaled Schur
/// complement) handled by scalar AMG.
MgrStrategy strategy_mgr_u();

/// Reduce pressures first: scalar AMG V-cycle on the slit block as the
/// F-solve, coarse grid on displacements handled by unknown-separated AMG.
MgrStrategy strategy_mgr_p_frac();

/// System plus an injection-source load at source_cell; metadata records the
/// slit cell map and the frozen-flux linearization.
ProblemBundle generate_bundle(const FracConfig& cfg);

}  // namespace mgrkit::frac

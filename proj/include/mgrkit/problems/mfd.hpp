#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mgrkit/bundle.hpp"
#include "mgrkit/mgr.hpp"
#include "mgrkit/sparse.hpp"
#include "mgrkit/types.hpp"

namespace mgrkit::mfd {

enum class InnerProduct { tpfa, consistent };

/// Pressure-linear fluid: density, viscosity and porosity vary linearly
/// around the reference pressure.
struct FluidModel {
  Real rho0 = 1000.0;          ///< kg/m^3 at p_ref
  Real compressibility = 1e-6; ///< 1/Pa, d(rho)/dp = rho0 * compressibility
  Real mu0 = 1e-3;             ///< Pa.s
  Real mu_slope = 0.0;         ///< Pa.s / Pa
  Real phi0 = 0.2;
  Real phi_slope = 1e-8;       ///< 1/Pa
  Real p_ref = 1e5;            ///< Pa
  Vec3 gravity = Vec3(0, 0, -9.81);

  Real density(Real p) const { return rho0 * (1.0 + compressibility * (p - p_ref)); }
  Real density_dp() const { return rho0 * compressibility; }
  Real viscosity(Real p) const { return mu0 + mu_slope * (p - p_ref); }
  Real viscosity_dp() const { return mu_slope; }
  Real porosity(Real p) const { return phi0 + phi_slope * (p - p_ref); }
  Real porosity_dp() const { return phi_slope; }
};

/// Structured hexahedral mesh on the unit box. Perturbation shifts interior
/// node columns in x/y only (constant along z), which keeps every face planar
/// so areas, centroids and the per-cell geometric identity stay exact.
struct HexMesh {
  Index nx = 0, ny = 0, nz = 0;
  Real hx = 0, hy = 0, hz = 0;
  std::vector<Vec3> nodes;
  std::vector<std::array<Index, 4>> face_nodes;  ///< ccw around the +axis normal
  std::vector<std::array<Index, 2>> face_cells;  ///< [minus side, plus side], -1 = none
  std::vector<Real> face_area;
  std::vector<Vec3> face_normal;                 ///< unit, oriented along the +axis
  std::vector<Vec3> face_centroid;
  std::vector<std::array<Index, 6>> cell_faces;  ///< x-,x+,y-,y+,z-,z+
  std::vector<Real> cell_volume;
  std::vector<Vec3> cell_centroid;

  Index num_cells() const { return nx * ny * nz; }
  Index num_faces() const { return static_cast<Index>(face_nodes.size()); }
  Index num_half_faces() const { return 6 * num_cells(); }
  bool face_on_boundary(Index f) const { return face_cells[f][0] < 0 || face_cells[f][1] < 0; }
  /// +1 when `cell` sits on the minus side of `f` (outward normal = face normal).
  Real outward_sign(Index f, Index cell) const { return face_cells[f][0] == cell ? 1.0 : -1.0; }
};

/// dims >= 1 each; perturbation in [0, 0.4) as a fraction of the cell size.
HexMesh build_mesh(Index nx, Index ny, Index nz, Real perturbation = 0.0, unsigned seed = 1234);

enum class FaceBc { interior, dirichlet, noflow };

struct BoundaryCondition {
  std::vector<FaceBc> kind;  ///< per face; `interior` for non-boundary faces
  std::vector<Real> value;   ///< multiplier value on dirichlet faces
};

/// Dirichlet p_inlet on the x- boundary, p_outlet on x+, no-flow elsewhere.
BoundaryCondition bc_inlet_outlet(const HexMesh& mesh, Real p_inlet, Real p_outlet);
BoundaryCondition bc_all_noflow(const HexMesh& mesh);
BoundaryCondition bc_all_dirichlet(const HexMesh& mesh, const std::function<Real(const Vec3&)>& p);

/// Unknowns of the hybrid formulation: cell pressures, one-sided volumetric
/// fluxes (6 per cell, outward positive), and face multipliers. Multiplier
/// dofs exist on interior and no-flow faces; dirichlet faces carry data only.
struct MfdState {
  Vec p;   ///< cells
  Vec w;   ///< half-faces
  Vec pi;  ///< multiplier dofs
};

/// Half-transmissibilities t_i = a_i (c_i . kappa n_i) / (c_i . c_i) of one
/// cell, ordered like cell_faces.
std::array<Real, 6> tpfa_half_transmissibilities(const HexMesh& mesh, Index cell, Real kappa);

/// Diagonal flux inner-product block diag(1/t_i).
Mat tpfa_inner_product(const HexMesh& mesh, Index cell, Real kappa);

/// Dense flux inner-product block W^{-1} with
/// W = (1/|E|) (kappa N N^T + t_stab (tr(kappa I)/3) (tr(N N^T)/6) (I - Q Q^T)),
/// N rows = outward vector areas, Q = orthonormal basis of the centroid
/// offsets. The construction satisfies W C = N kappa exactly, which makes the
/// scheme reproduce linear pressure fields on any admissible cell; the
/// stabilization matches the mean consistency eigenvalue, and t_stab = 2
/// turns a cube cell into the diagonal two-point block.
Mat consistent_inner_product(const HexMesh& mesh, Index cell, Real kappa, Real t_stab = 2.0);

/// Jacobian blocks and residuals of the hybrid system at the given state.
/// Row groups: half-face Darcy relations, cell mass balances, face flux
/// continuity. A_wpi is the one-sided-face-to-face incidence with entries -1;
/// the assembled matrix places -A_wpi in the (w,pi) slot and A_wpi^T in
/// (pi,w). The mass residual uses mass_prev as the previous-step cell mass.
struct HybridMfdSystem {
  SpMat A_ww, A_wp, A_wpi, A_pw, A_pp;
  Vec r_w, r_p, r_pi;
  BlockLayout ww_layout;
  std::vector<Index> pi_face;         ///< face id per multiplier dof
  std::vector<Index> pi_dof_of_face;  ///< -1 when the face has no dof

  Index n_w() const { return A_ww.rows(); }
  Index n_p() const { return A_pp.rows(); }
  Index n_pi() const { return static_cast<Index>(pi_face.size()); }
  SpMat full_matrix() const;
  Vec full_rhs() const;  ///< negated residual, ordered [w, p, pi]
  DofPartition partition() const;
};

HybridMfdSystem assemble_hybrid(const HexMesh& mesh, const FluidModel& fluid,
                                const MfdState& state, const Vec& mass_prev, Real dt, Real kappa,
                                InnerProduct inner, const BoundaryCondition& bc,
                                Real t_stab = 2.0);

/// Cell masses V phi(p) rho(p).
Vec cell_mass(const HexMesh& mesh, const FluidModel& fluid, const Vec& p);

/// Gravity offset b_i = rho(p_cell) g.(x_face - x_cell) for every half-face.
Vec gravity_offsets(const HexMesh& mesh, const FluidModel& fluid, const Vec& p);

/// Two-field reduction of the hybrid system after exact per-cell elimination
/// of the fluxes. Field order [p, pi].
struct CondensedSystem {
  SpMat App, Appi, Apip, Apipi;
  Vec f_p, f_pi;  ///< condensed Newton right-hand side

  SpMat matrix() const;
  Vec rhs() const;
  DofPartition partition() const;
};

CondensedSystem static_condense(const HybridMfdSystem& sys);

/// Flux update consistent with a condensed-system solution.
Vec recover_w(const HybridMfdSystem& sys, const Vec& dp, const Vec& dpi);

/// State whose Darcy and continuity residuals vanish for the diagonal inner
/// product: face multipliers from half-transmissibility averages, fluxes from
/// the two-point relation, w = 0 on no-flow faces.
MfdState consistent_state_from_pressure(const HexMesh& mesh, const FluidModel& fluid,
                                        const BoundaryCondition& bc, const Vec& p, Real kappa);

/// Independently assembled cell-centered two-point Jacobian (harmonic face
/// transmissibilities, upwinded mobility, accumulation on the diagonal).
/// Oracle for the eliminated multiplier system.
SpMat tpfa_reference_assembly(const HexMesh& mesh, const FluidModel& fluid, const MfdState& state,
                              Real dt, Real kappa, const BoundaryCondition& bc);

/// Multiplier-elimination strategy: exact on the diagonal multiplier block of
/// the two-point inner product; with the consistent inner product the block
/// is no longer diagonal, so ideal interpolation is replaced by jacobi and a
/// warning is recorded.
MgrStrategy strategy_mgr_pi(InnerProduct inner, std::vector<std::string>* warnings = nullptr);

/// Pressure-elimination strategy; the coarse grid lives on the multipliers.
MgrStrategy strategy_mgr_p(InnerProduct inner);

struct MfdConfig {
  Index nx = 8, ny = 8, nz = 8;
  Real perturbation = 0.0;
  unsigned seed = 1234;
  InnerProduct inner = InnerProduct::tpfa;
  Real kappa = 1e-10;  ///< m^2
  Real dt = 1e3;       ///< s
  Index time_steps = 3;
  FluidModel fluid;
  Real p_init = 1e5;
  Real p_inlet = 2e5;
  Real p_outlet = 1e5;
  bool gravity_on = true;
};

/// Runs `time_steps` implicit steps of the inlet/outlet scenario (Newton with
/// the module's own preconditioned solver), then emits the condensed Jacobian
/// and Newton right-hand side of the next step as a bundle.
ProblemBundle generate_bundle(const MfdConfig& cfg);

}  // namespace mgrkit::mfd

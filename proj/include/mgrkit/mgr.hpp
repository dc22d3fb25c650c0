/// @file mgr.hpp
/// @brief Multigrid reduction: field-based C/F splitting, reduction-style
/// transfer operators, Galerkin coarse grids, and the multi-level V-cycle.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mgrkit/amg.hpp"
#include "mgrkit/krylov.hpp"
#include "mgrkit/relax.hpp"
#include "mgrkit/sparse.hpp"
#include "mgrkit/types.hpp"

namespace mgrkit {

/// Physics-based labeling of global dofs by field name.
struct DofPartition {
  std::vector<std::string> field_order;
  std::vector<Index> labels;  // per dof, index into field_order

  static DofPartition from_names(std::vector<std::string> field_order,
                                 const std::vector<std::string>& names);
  Index field_id(const std::string& name) const;  // throws on unknown field
  const std::string& name_of(Index dof) const { return field_order[labels[dof]]; }
};

/// F = dofs labeled with one of f_fields, C = complement; both sorted.
void split(const DofPartition& partition, const std::vector<std::string>& f_fields, IndexList& F,
           IndexList& C);

enum class InterpKind { ideal, jacobi };
enum class RestrictKind { injection, jacobi, ideal };

/// P = [-W; I] with F-rows W = A_FF^{-1} A_FC (ideal) or diag(A_FF)^{-1} A_FC
/// (jacobi), C-rows identity, in global dof order. Ideal requires A_FF
/// structurally diagonal, |F| <= 2000 (dense LU), or a declared block layout.
SpMat build_interp(const SpMat& A, const IndexList& F, const IndexList& C, InterpKind kind,
                   const BlockLayout* ff_layout = nullptr);

/// R rows span C: injection [0 I], jacobi [-A_CF diag(A_FF)^{-1}, I],
/// ideal [-A_CF A_FF^{-1}, I].
SpMat build_restrict(const SpMat& A, const IndexList& F, const IndexList& C, RestrictKind kind,
                     const BlockLayout* ff_layout = nullptr);

/// Petrov-Galerkin triple product R*A*P.
SpMat coarse_operator(const SpMat& A, const SpMat& R, const SpMat& P);

/// A_CC - A_CF diag(A_FF)^{-1} A_FC, assembled directly from the blocks.
/// Reference for the injection-restrict / jacobi-interp coarse operator.
SpMat schur_jacobi_direct(const SpMat& A, const IndexList& F, const IndexList& C);

struct CoarseSolverSpec {
  enum class Kind { dense_lu, amg_vcycle, gmres_inner };
  Kind kind = Kind::dense_lu;
  AmgConfig amg;          // amg_vcycle
  Index amg_cycles = 1;   // amg_vcycle
  bool use_unknown_map = false;  // amg_vcycle: adopt the coarse-level map
  KrylovConfig krylov;    // gmres_inner
};

struct MgrLevelSpec {
  std::vector<std::string> f_fields;
  InterpKind interp = InterpKind::jacobi;
  RestrictKind restrict_kind = RestrictKind::injection;
  SmootherSpec f_relax;
  std::optional<SmootherSpec> global_relax;  // default absent
  std::optional<std::vector<Index>> ff_block_sizes;  // declared A_FF layout
};

struct MgrStrategy {
  std::string name;
  std::vector<MgrLevelSpec> levels;
  CoarseSolverSpec coarse;
};

struct MgrLevel {
  SpMat A;
  IndexList F, C;  // level-local indices
  SpMat P, R;
  BoundSmoother f_relax;  // bound to A_FF
  std::optional<BoundSmoother> global_relax;
  IndexList finest_ids;  // finest-level dof of each level dof
};

class MgrHierarchy {
 public:
  std::vector<MgrLevel> levels;
  SpMat A_coarse;
  CoarseSolverSpec coarse_spec;
  DenseLU coarse_lu;                          // dense_lu kind
  std::shared_ptr<AmgHierarchy> coarse_amg;   // amg_vcycle kind
  IndexList coarse_finest_ids;
  std::vector<int> coarse_unknown_map;

  Index num_reduction_levels() const { return static_cast<Index>(levels.size()); }
  Index fine_size() const { return levels.empty() ? A_coarse.rows() : levels.front().A.rows(); }
};

/// Build splits, transfers, Galerkin coarse operators, and bound solvers for
/// every reduction level, then the coarsest-grid solver. `unknown_map`, when
/// given, is restricted level-by-level and feeds smoothers that request it.
MgrHierarchy mgr_setup(const SpMat& A, const DofPartition& partition, const MgrStrategy& strategy,
                       const std::vector<int>* unknown_map = nullptr);

/// One V-cycle of the reduction hierarchy applied to v (zero initial guess):
/// optional global relaxation, F-relaxation on A_FF, restricted-residual
/// recursion, coarse solve, interpolated correction.
Vec mgr_apply(const MgrHierarchy& H, const Vec& v);

/// mgr_apply wrapped as a right-preconditioner operator.
LinOp mgr_preconditioner(const MgrHierarchy& H);

}  // namespace mgrkit

/// @file amg.hpp
/// @brief Classical AMG V-cycle: PMIS coarsening, direct interpolation,
/// Galerkin coarse operators, with an unknown-based variant for systems.
#pragma once

#include <vector>

#include "mgrkit/relax.hpp"
#include "mgrkit/sparse.hpp"
#include "mgrkit/types.hpp"

namespace mgrkit {

struct AmgConfig {
  Real strength_theta = 0.25;
  Index max_levels = 25;
  Index coarse_size = 50;  // dense LU at or below this size
  SmootherSpec pre_smoother{SmootherKind::hybrid_l1_gs_forward, 1, 1.0, {}, {}, nullptr, false};
  SmootherSpec post_smoother{SmootherKind::hybrid_l1_gs_backward, 1, 1.0, {}, {}, nullptr, false};
  /// Unknown id per fine dof; when nonempty, strength, coarsening and
  /// interpolation act per unknown (cross-unknown interpolation weights are
  /// zero) while coarse operators use the full matrix.
  std::vector<int> unknown_map;
};

struct AmgLevel {
  SpMat A;
  SpMat P;  // empty on the coarsest level
  SpMat R;  // transpose(P)
  BoundSmoother pre;
  BoundSmoother post;
  std::vector<int> unknown_map;
};

struct AmgSetupInfo {
  std::vector<Index> level_sizes;
  Index interp_fallback_rows = 0;  // F-rows using diagonally scaled weights
  bool truncated = false;          // coarsening stalled, hierarchy cut short
};

class AmgHierarchy {
 public:
  std::vector<AmgLevel> levels;
  DenseLU coarse_solver;
  AmgSetupInfo info;

  Index num_levels() const { return static_cast<Index>(levels.size()); }
  Index fine_size() const { return levels.empty() ? 0 : levels.front().A.rows(); }
};

/// Pattern of strong couplings: (i,j) present iff -a_ij >= theta * max_k(-a_ik)
/// over off-diagonals; rows without negative off-diagonals fall back to the
/// absolute-value measure. Values are 1.0, diagonal excluded.
SpMat strength_graph(const SpMat& A, Real theta);

/// PMIS splitting on the union-symmetrized graph with measure = in-degree of
/// the given (directed) strength graph. Deterministic: ties break toward the
/// smaller index. Isolated points become C.
void pmis_coarsen(const SpMat& strength, IndexList& C, IndexList& F);

/// Direct classical interpolation. C-rows are unit rows; F-row weights are
/// w_ij = -(a_ij/a_ii) * (sum_{k != i} a_ik) / (sum_{k in strong C nbrs} a_ik).
/// F-rows without usable strong C-neighbors fall back to -a_ij/a_ii over all
/// C-neighbors; `fallback_rows`, when given, counts them.
SpMat classical_interp(const SpMat& A, const SpMat& strength, const IndexList& C,
                       const IndexList& F, Index* fallback_rows = nullptr);

AmgHierarchy amg_setup(const SpMat& A, const AmgConfig& cfg);

/// One V(1,1) cycle on residual r with zero initial guess.
Vec amg_vcycle(const AmgHierarchy& H, const Vec& r);

}  // namespace mgrkit

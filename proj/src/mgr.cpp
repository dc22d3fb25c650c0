#include "mgrkit/mgr.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace mgrkit {

DofPartition DofPartition::from_names(std::vector<std::string> field_order,
                                      const std::vector<std::string>& names) {
  DofPartition p;
  p.field_order = std::move(field_order);
  p.labels.reserve(names.size());
  for (const std::string& s : names) p.labels.push_back(p.field_id(s));
  return p;
}

Index DofPartition::field_id(const std::string& name) const {
  for (Index k = 0; k < static_cast<Index>(field_order.size()); ++k)
    if (field_order[k] == name) return k;
  throw std::invalid_argument("unknown field name: " + name);
}

namespace {

void split_ids(const std::vector<Index>& labels, const std::vector<char>& is_f, IndexList& F,
               IndexList& C) {
  F.clear();
  C.clear();
  for (Index i = 0; i < static_cast<Index>(labels.size()); ++i)
    (is_f[labels[i]] ? F : C).push_back(i);
  if (F.empty()) throw std::invalid_argument("split: F set is empty");
  if (C.empty()) throw std::invalid_argument("split: C set is empty (all fields eliminated)");
}

std::vector<char> f_field_mask(const DofPartition& partition,
                               const std::vector<std::string>& f_fields) {
  if (f_fields.empty()) throw std::invalid_argument("split: f_fields must be nonempty");
  std::vector<char> mask(partition.field_order.size(), 0);
  for (const std::string& name : f_fields) mask[partition.field_id(name)] = 1;
  return mask;
}

/// X = A_FF^{-1} B, by the cheapest exact route available.
SpMat ff_inverse_times(const SpMat& A_FF, const SpMat& B, const BlockLayout* layout) {
  if (is_structurally_diagonal(A_FF)) {
    const Vec dinv = diag_inverse(A_FF);
    SpMat X = B;
    for (Index i = 0; i < X.rows(); ++i)
      for (SpMat::InnerIterator it(X, i); it; ++it) it.valueRef() *= dinv[i];
    return X;
  }
  if (layout != nullptr) return BlockDiagonalLU(A_FF, *layout).solve_columns(B);
  if (A_FF.rows() <= 2000) {
    const DenseLU lu = factor_dense(A_FF);
    const Mat X = lu.solve(Mat(B));
    SpMat Xs = X.sparseView();
    Xs.makeCompressed();
    return Xs;
  }
  throw std::runtime_error(
      "ideal transfer operators require a structurally diagonal A_FF, a declared block "
      "layout, or |F| <= 2000 for a dense factorization");
}

void check_partition_sets(Index n, const IndexList& F, const IndexList& C) {
  std::vector<char> seen(n, 0);
  for (Index i : F) {
    if (i < 0 || i >= n || seen[i]) throw std::invalid_argument("F/C sets do not partition dofs");
    seen[i] = 1;
  }
  for (Index i : C) {
    if (i < 0 || i >= n || seen[i]) throw std::invalid_argument("F/C sets do not partition dofs");
    seen[i] = 1;
  }
  if (static_cast<Index>(F.size() + C.size()) != n)
    throw std::invalid_argument("F/C sets do not partition dofs");
}

}  // namespace

void split(const DofPartition& partition, const std::vector<std::string>& f_fields, IndexList& F,
           IndexList& C) {
  const std::vector<char> mask = f_field_mask(partition, f_fields);
  split_ids(partition.labels, mask, F, C);
}

SpMat build_interp(const SpMat& A, const IndexList& F, const IndexList& C, InterpKind kind,
                   const BlockLayout* ff_layout) {
  const Index n = A.rows();
  check_partition_sets(n, F, C);
  const Index nf = static_cast<Index>(F.size());
  const Index nc = static_cast<Index>(C.size());

  const SpMat A_FC = extract(A, F, C);
  SpMat W;  // |F| x |C|, F-rows of P are -W
  if (kind == InterpKind::jacobi) {
    const Vec dinv = diag_inverse(extract(A, F, F));
    W = A_FC;
    for (Index i = 0; i < nf; ++i)
      for (SpMat::InnerIterator it(W, i); it; ++it) it.valueRef() *= dinv[i];
  } else {
    W = ff_inverse_times(extract(A, F, F), A_FC, ff_layout);
  }

  std::vector<Triplet> entries;
  entries.reserve(W.nonZeros() + C.size());
  for (Index i = 0; i < nf; ++i)
    for (SpMat::InnerIterator it(W, i); it; ++it)
      entries.push_back({F[i], static_cast<Index>(it.col()), -it.value()});
  for (Index j = 0; j < nc; ++j) entries.push_back({C[j], j, 1.0});
  return from_triplets(n, nc, entries);
}

SpMat build_restrict(const SpMat& A, const IndexList& F, const IndexList& C, RestrictKind kind,
                     const BlockLayout* ff_layout) {
  const Index n = A.rows();
  check_partition_sets(n, F, C);
  const Index nf = static_cast<Index>(F.size());
  const Index nc = static_cast<Index>(C.size());

  std::vector<Triplet> entries;
  if (kind != RestrictKind::injection) {
    const SpMat A_CF = extract(A, C, F);
    SpMat Z;  // |C| x |F|, F-columns of R are -Z
    if (kind == RestrictKind::jacobi) {
      const Vec dinv = diag_inverse(extract(A, F, F));
      Z = A_CF;
      for (Index i = 0; i < nc; ++i)
        for (SpMat::InnerIterator it(Z, i); it; ++it) it.valueRef() *= dinv[it.col()];
    } else {
      // A_CF A_FF^{-1} = (A_FF^{-T} A_CF^{T})^{T}
      const SpMat A_FFt = SpMat(extract(A, F, F).transpose());
      const SpMat A_CFt = SpMat(A_CF.transpose());
      Z = SpMat(ff_inverse_times(A_FFt, A_CFt, ff_layout).transpose());
    }
    entries.reserve(Z.nonZeros() + C.size());
    for (Index i = 0; i < nc; ++i)
      for (SpMat::InnerIterator it(Z, i); it; ++it)
        entries.push_back({i, F[it.col()], -it.value()});
  }
  for (Index j = 0; j < nc; ++j) entries.push_back({j, C[j], 1.0});
  (void)nf;
  return from_triplets(nc, n, entries);
}

SpMat coarse_operator(const SpMat& A, const SpMat& R, const SpMat& P) {
  if (R.cols() != A.rows() || A.cols() != P.rows() || R.rows() != P.cols())
    throw std::invalid_argument("coarse_operator: dimension mismatch");
  return matmul(R, matmul(A, P));
}

SpMat schur_jacobi_direct(const SpMat& A, const IndexList& F, const IndexList& C) {
  check_partition_sets(A.rows(), F, C);
  const SpMat A_CC = extract(A, C, C);
  const SpMat A_FC = extract(A, F, C);
  SpMat A_CF = extract(A, C, F);
  const Vec dinv = diag_inverse(extract(A, F, F));
  for (Index i = 0; i < A_CF.rows(); ++i)
    for (SpMat::InnerIterator it(A_CF, i); it; ++it) it.valueRef() *= dinv[it.col()];
  SpMat S = A_CC - matmul(A_CF, A_FC);
  S.makeCompressed();
  return S;
}

namespace {

template <typename T>
std::vector<T> gather(const std::vector<T>& v, const IndexList& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(v[i]);
  return out;
}

Vec coarse_solve(const MgrHierarchy& H, const Vec& v) {
  switch (H.coarse_spec.kind) {
    case CoarseSolverSpec::Kind::dense_lu:
      return H.coarse_lu.solve(v);
    case CoarseSolverSpec::Kind::amg_vcycle: {
      Vec z = amg_vcycle(*H.coarse_amg, v);
      for (Index c = 1; c < H.coarse_spec.amg_cycles; ++c)
        z += amg_vcycle(*H.coarse_amg, v - H.A_coarse * z);
      return z;
    }
    case CoarseSolverSpec::Kind::gmres_inner: {
      Vec x = Vec::Zero(v.size());
      gmres(H.A_coarse, v, x, H.coarse_spec.krylov);
      return x;
    }
  }
  throw std::logic_error("coarse_solve: unreachable");
}

Vec apply_level(const MgrHierarchy& H, Index level, const Vec& v) {
  if (level == H.num_reduction_levels()) return coarse_solve(H, v);
  const MgrLevel& L = H.levels[level];

  Vec z;
  if (L.global_relax.has_value())
    z = L.global_relax->apply(v);
  else
    z = Vec::Zero(v.size());

  // F-relaxation in correction form on the F-restricted residual.
  {
    const Vec r = L.global_relax.has_value() ? Vec(v - L.A * z) : v;
    Vec rF(L.F.size());
    for (Index i = 0; i < static_cast<Index>(L.F.size()); ++i) rF[i] = r[L.F[i]];
    const Vec zF = L.f_relax.apply(rF);
    for (Index i = 0; i < static_cast<Index>(L.F.size()); ++i) z[L.F[i]] += zF[i];
  }

  const Vec rc = L.R * (v - L.A * z);
  const Vec e = apply_level(H, level + 1, rc);
  z += L.P * e;
  return z;
}

}  // namespace

MgrHierarchy mgr_setup(const SpMat& A, const DofPartition& partition, const MgrStrategy& strategy,
                       const std::vector<int>* unknown_map) {
  if (A.rows() != A.cols()) throw std::invalid_argument("mgr_setup: matrix must be square");
  if (static_cast<Index>(partition.labels.size()) != A.rows())
    throw std::invalid_argument("mgr_setup: partition size does not match the matrix");
  if (unknown_map != nullptr && static_cast<Index>(unknown_map->size()) != A.rows())
    throw std::invalid_argument("mgr_setup: unknown_map size mismatch");

  // Each field may be eliminated at most once across levels.
  {
    std::unordered_set<std::string> used;
    for (const MgrLevelSpec& spec : strategy.levels) {
      if (spec.f_fields.empty())
        throw std::invalid_argument("mgr_setup: a level with no f_fields");
      for (const std::string& f : spec.f_fields) {
        partition.field_id(f);  // unknown-name check
        if (!used.insert(f).second)
          throw std::invalid_argument("mgr_setup: field eliminated twice: " + f);
      }
    }
  }

  MgrHierarchy H;
  H.coarse_spec = strategy.coarse;

  SpMat A_cur = A;
  std::vector<Index> labels = partition.labels;
  IndexList finest_ids(A.rows());
  for (Index i = 0; i < A.rows(); ++i) finest_ids[i] = i;
  std::vector<int> umap;
  if (unknown_map != nullptr) umap = *unknown_map;

  for (const MgrLevelSpec& spec : strategy.levels) {
    MgrLevel L;
    L.A = A_cur;
    L.finest_ids = finest_ids;

    const std::vector<char> mask = f_field_mask(partition, spec.f_fields);
    split_ids(labels, mask, L.F, L.C);

    BlockLayout layout;
    const BlockLayout* layout_ptr = nullptr;
    if (spec.ff_block_sizes.has_value()) {
      layout = BlockLayout::from_sizes(*spec.ff_block_sizes);
      layout_ptr = &layout;
    }

    L.P = build_interp(A_cur, L.F, L.C, spec.interp, layout_ptr);
    L.R = build_restrict(A_cur, L.F, L.C, spec.restrict_kind, layout_ptr);

    const SpMat A_FF = extract(A_cur, L.F, L.F);
    std::vector<int> umap_f;
    const std::vector<int>* umap_f_ptr = nullptr;
    if (!umap.empty()) {
      umap_f = gather(umap, L.F);
      umap_f_ptr = &umap_f;
    }
    L.f_relax = BoundSmoother::bind(spec.f_relax, A_FF, umap_f_ptr);
    if (spec.global_relax.has_value())
      L.global_relax = BoundSmoother::bind(*spec.global_relax, A_cur,
                                           umap.empty() ? nullptr : &umap);

    SpMat A_next = coarse_operator(A_cur, L.R, L.P);
    labels = gather(labels, L.C);
    finest_ids = gather(finest_ids, L.C);
    if (!umap.empty()) umap = gather(umap, L.C);

    H.levels.push_back(std::move(L));
    A_cur = std::move(A_next);
  }

  H.A_coarse = A_cur;
  H.coarse_finest_ids = finest_ids;
  H.coarse_unknown_map = umap;

  switch (strategy.coarse.kind) {
    case CoarseSolverSpec::Kind::dense_lu:
      H.coarse_lu = factor_dense(H.A_coarse);
      break;
    case CoarseSolverSpec::Kind::amg_vcycle: {
      AmgConfig cfg = strategy.coarse.amg;
      if (strategy.coarse.use_unknown_map) {
        if (umap.empty())
          throw std::invalid_argument("mgr_setup: coarse solver requests an unknown map, none given");
        cfg.unknown_map = umap;
      }
      H.coarse_amg = std::make_shared<AmgHierarchy>(amg_setup(H.A_coarse, cfg));
      break;
    }
    case CoarseSolverSpec::Kind::gmres_inner:
      break;
  }
  return H;
}

Vec mgr_apply(const MgrHierarchy& H, const Vec& v) {
  if (v.size() != H.fine_size()) throw std::invalid_argument("mgr_apply: size mismatch");
  return apply_level(H, 0, v);
}

LinOp mgr_preconditioner(const MgrHierarchy& H) {
  const MgrHierarchy* h = &H;
  return [h](const Vec& v) -> Vec { return mgr_apply(*h, v); };
}

}  // namespace mgrkit

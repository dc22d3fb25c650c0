#include "mgrkit/amg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mgrkit {

SpMat strength_graph(const SpMat& A, Real theta) {
  if (A.rows() != A.cols()) throw std::invalid_argument("strength_graph: matrix must be square");
  const Index n = A.rows();
  std::vector<Triplet> edges;
  for (Index i = 0; i < n; ++i) {
    Real max_neg = 0.0;  // max over k != i of (-a_ik)
    Real max_abs = 0.0;
    for (SpMat::InnerIterator it(A, i); it; ++it) {
      if (it.col() == i) continue;
      max_neg = std::max(max_neg, -it.value());
      max_abs = std::max(max_abs, std::abs(it.value()));
    }
    if (max_abs == 0.0) continue;
    const bool use_neg = max_neg > 0.0;
    const Real cut = theta * (use_neg ? max_neg : max_abs);
    for (SpMat::InnerIterator it(A, i); it; ++it) {
      if (it.col() == i) continue;
      const Real measure = use_neg ? -it.value() : std::abs(it.value());
      if (measure >= cut && measure > 0.0)
        edges.push_back({i, static_cast<Index>(it.col()), 1.0});
    }
  }
  return from_triplets(n, n, edges);
}

void pmis_coarsen(const SpMat& strength, IndexList& C, IndexList& F) {
  const Index n = strength.rows();
  C.clear();
  F.clear();

  // Measure: in-degree of the directed graph (how many points depend on i).
  std::vector<Index> lambda(n, 0);
  for (Index i = 0; i < n; ++i)
    for (SpMat::InnerIterator it(strength, i); it; ++it) ++lambda[it.col()];

  // Union-symmetrized adjacency for the independent-set selection.
  SpMat sym = strength + SpMat(strength.transpose());
  sym.makeCompressed();

  enum class State : unsigned char { undecided, c_point, f_point };
  std::vector<State> state(n, State::undecided);
  Index remaining = n;

  while (remaining > 0) {
    // Snapshot selection: i wins if it beats every undecided neighbor.
    std::vector<Index> winners;
    for (Index i = 0; i < n; ++i) {
      if (state[i] != State::undecided) continue;
      bool wins = true;
      for (SpMat::InnerIterator it(sym, i); it && wins; ++it) {
        const Index j = it.col();
        if (j == i || state[j] != State::undecided) continue;
        if (!(lambda[i] > lambda[j] || (lambda[i] == lambda[j] && i < j))) wins = false;
      }
      if (wins) winners.push_back(i);
    }
    if (winners.empty())
      throw std::logic_error("pmis_coarsen: stalled selection round");
    for (Index i : winners) {
      state[i] = State::c_point;
      --remaining;
    }
    for (Index i : winners) {
      for (SpMat::InnerIterator it(sym, i); it; ++it) {
        const Index j = it.col();
        if (state[j] == State::undecided) {
          state[j] = State::f_point;
          --remaining;
        }
      }
    }
  }

  for (Index i = 0; i < n; ++i)
    (state[i] == State::c_point ? C : F).push_back(i);
}

SpMat classical_interp(const SpMat& A, const SpMat& strength, const IndexList& C,
                       const IndexList& F, Index* fallback_rows) {
  const Index n = A.rows();
  if (static_cast<Index>(C.size() + F.size()) != n)
    throw std::invalid_argument("classical_interp: C/F do not partition the dofs");

  std::vector<Index> coarse_id(n, -1);
  for (Index k = 0; k < static_cast<Index>(C.size()); ++k) coarse_id[C[k]] = k;

  Index fallbacks = 0;
  std::vector<Triplet> entries;
  for (Index c : C) entries.push_back({c, coarse_id[c], 1.0});

  std::vector<char> strong(n, 0);
  for (Index i : F) {
    for (SpMat::InnerIterator it(strength, i); it; ++it) strong[it.col()] = 1;

    Real aii = 0.0, row_sum = 0.0, strong_c_sum = 0.0, row_max = 0.0;
    for (SpMat::InnerIterator it(A, i); it; ++it) {
      row_max = std::max(row_max, std::abs(it.value()));
      if (it.col() == i) {
        aii = it.value();
        continue;
      }
      row_sum += it.value();
      if (coarse_id[it.col()] >= 0 && strong[it.col()]) strong_c_sum += it.value();
    }
    if (aii == 0.0) throw std::runtime_error("classical_interp: zero diagonal at an F-row");

    const bool usable = std::abs(strong_c_sum) > 1e-14 * row_max;
    if (usable) {
      const Real scale = row_sum / (aii * strong_c_sum);
      for (SpMat::InnerIterator it(A, i); it; ++it) {
        const Index j = it.col();
        if (j == i || coarse_id[j] < 0 || !strong[j]) continue;
        entries.push_back({i, coarse_id[j], -it.value() * scale});
      }
    } else {
      // No strong C-neighbor carries weight: fall back to plain
      // diagonally scaled weights over every C-neighbor in the row.
      ++fallbacks;
      for (SpMat::InnerIterator it(A, i); it; ++it) {
        const Index j = it.col();
        if (j == i || coarse_id[j] < 0) continue;
        entries.push_back({i, coarse_id[j], -it.value() / aii});
      }
    }

    for (SpMat::InnerIterator it(strength, i); it; ++it) strong[it.col()] = 0;
  }

  if (fallback_rows != nullptr) *fallback_rows += fallbacks;
  return from_triplets(n, static_cast<Index>(C.size()), entries);
}

namespace {

/// Scalar-problem interpolation for one level; `idx` maps submatrix rows back
/// to global rows. Appends global triplets and the sorted global C list.
void interp_for_group(const SpMat& A_sub, Real theta, const IndexList& idx,
                      std::vector<Index>& global_c, std::vector<std::array<Index, 2>>& rows_cols,
                      std::vector<std::vector<Triplet>>& group_entries, Index* fallback_rows) {
  IndexList C, F;
  const SpMat S = strength_graph(A_sub, theta);
  pmis_coarsen(S, C, F);
  SpMat P = classical_interp(A_sub, S, C, F, fallback_rows);

  std::vector<Triplet> local;
  local.reserve(P.nonZeros());
  for (Index r = 0; r < P.rows(); ++r)
    for (SpMat::InnerIterator it(P, r); it; ++it)
      local.push_back({idx[r], static_cast<Index>(it.col()), it.value()});  // col remapped later

  std::vector<Index> c_global(C.size());
  for (size_t k = 0; k < C.size(); ++k) c_global[k] = idx[C[k]];

  rows_cols.push_back({static_cast<Index>(global_c.size()), static_cast<Index>(C.size())});
  global_c.insert(global_c.end(), c_global.begin(), c_global.end());
  group_entries.push_back(std::move(local));
}

struct LevelBuild {
  SpMat P;
  std::vector<int> coarse_unknowns;
  bool stalled = false;
};

LevelBuild build_level_interp(const SpMat& A, const AmgConfig& cfg,
                              const std::vector<int>& unknown_map, Index* fallback_rows) {
  const Index n = A.rows();
  LevelBuild out;

  std::vector<Index> global_c;                       // global fine index of each coarse dof
  std::vector<std::array<Index, 2>> offsets;         // (coarse offset, count) per group
  std::vector<std::vector<Triplet>> group_entries;   // triplets with local coarse cols

  if (unknown_map.empty()) {
    IndexList all(n);
    std::iota(all.begin(), all.end(), 0);
    interp_for_group(A, cfg.strength_theta, all, global_c, offsets, group_entries, fallback_rows);
  } else {
    std::vector<int> ids = unknown_map;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) {
      IndexList idx;
      for (Index i = 0; i < n; ++i)
        if (unknown_map[i] == id) idx.push_back(i);
      SpMat A_sub = extract(A, idx, idx);
      interp_for_group(A_sub, cfg.strength_theta, idx, global_c, offsets, group_entries,
                       fallback_rows);
    }
  }

  if (static_cast<Index>(global_c.size()) == n) {
    out.stalled = true;
    return out;
  }

  // Sort coarse dofs by global fine index so coarse ordering follows fine
  // ordering; remap per-group local coarse columns through that sort.
  std::vector<Index> order(global_c.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return global_c[a] < global_c[b]; });
  std::vector<Index> new_pos(global_c.size());
  for (Index k = 0; k < static_cast<Index>(order.size()); ++k) new_pos[order[k]] = k;

  std::vector<Triplet> entries;
  for (size_t g = 0; g < group_entries.size(); ++g) {
    const Index base = offsets[g][0];
    for (const Triplet& t : group_entries[g])
      entries.push_back({t.row(), new_pos[base + t.col()], t.value()});
  }
  out.P = from_triplets(n, static_cast<Index>(global_c.size()), entries);

  if (!unknown_map.empty()) {
    out.coarse_unknowns.resize(global_c.size());
    for (Index k = 0; k < static_cast<Index>(order.size()); ++k)
      out.coarse_unknowns[k] = unknown_map[global_c[order[k]]];
  }
  return out;
}

Vec vcycle_level(const AmgHierarchy& H, Index level, const Vec& r) {
  const AmgLevel& L = H.levels[level];
  if (level == H.num_levels() - 1) return H.coarse_solver.solve(r);

  Vec z = L.pre.apply(r);
  Vec rc = L.R * (r - L.A * z);
  Vec ec = vcycle_level(H, level + 1, rc);
  z += L.P * ec;
  z += L.post.apply(r - L.A * z);
  return z;
}

}  // namespace

AmgHierarchy amg_setup(const SpMat& A, const AmgConfig& cfg) {
  if (A.rows() != A.cols()) throw std::invalid_argument("amg_setup: matrix must be square");
  if (!(cfg.strength_theta > 0.0 && cfg.strength_theta < 1.0))
    throw std::invalid_argument("amg_setup: strength_theta must lie in (0,1)");
  if (cfg.coarse_size < 1) throw std::invalid_argument("amg_setup: coarse_size must be >= 1");
  if (!cfg.unknown_map.empty() && static_cast<Index>(cfg.unknown_map.size()) != A.rows())
    throw std::invalid_argument("amg_setup: unknown_map size mismatch");

  AmgHierarchy H;
  SpMat A_cur = A;
  std::vector<int> map_cur = cfg.unknown_map;

  while (true) {
    const Index n = A_cur.rows();
    H.info.level_sizes.push_back(n);
    AmgLevel level;
    level.A = A_cur;
    level.unknown_map = map_cur;

    const bool last_allowed = H.num_levels() + 1 >= cfg.max_levels;
    if (n <= cfg.coarse_size || last_allowed) {
      H.levels.push_back(std::move(level));
      break;
    }

    LevelBuild built = build_level_interp(A_cur, cfg, map_cur, &H.info.interp_fallback_rows);
    if (built.stalled) {
      H.info.truncated = true;
      H.levels.push_back(std::move(level));
      break;
    }

    level.P = built.P;
    level.R = SpMat(built.P.transpose());
    level.pre = BoundSmoother::bind(cfg.pre_smoother, A_cur);
    level.post = BoundSmoother::bind(cfg.post_smoother, A_cur);

    SpMat A_next = matmul(level.R, matmul(A_cur, level.P));
    H.levels.push_back(std::move(level));
    A_cur = std::move(A_next);
    map_cur = std::move(built.coarse_unknowns);
  }

  H.coarse_solver = factor_dense(H.levels.back().A);
  return H;
}

Vec amg_vcycle(const AmgHierarchy& H, const Vec& r) {
  if (H.levels.empty()) throw std::logic_error("amg_vcycle: empty hierarchy");
  if (r.size() != H.fine_size()) throw std::invalid_argument("amg_vcycle: residual size mismatch");
  return vcycle_level(H, 0, r);
}

}  // namespace mgrkit

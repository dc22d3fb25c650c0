#include "mgrkit/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <utility>

#include "mgrkit/amg.hpp"
#include "mgrkit/krylov.hpp"
#include "mgrkit/mgr.hpp"
#include "mgrkit/problems/comp.hpp"
#include "mgrkit/problems/frac.hpp"
#include "mgrkit/problems/mfd.hpp"
#include "mgrkit/sparse.hpp"

namespace mgrkit::verify {

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

CheckResult timed(const std::string& name,
                  const std::function<std::pair<bool, std::string>()>& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto [pass, detail] = body();
    r.pass = pass;
    r.detail = std::move(detail);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

SpMat random_system(std::mt19937& rng, Index n) {
  std::uniform_real_distribution<Real> dist(-1.0, 1.0);
  Mat M(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) M(i, j) = dist(rng);
  M += static_cast<Real>(n) * Mat::Identity(n, n);
  std::vector<Eigen::Triplet<Real>> t;
  t.reserve(static_cast<std::size_t>(n) * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) t.emplace_back(i, j, M(i, j));
  return from_triplets(n, n, t);
}

Vec random_load(std::mt19937& rng, Index n) {
  std::uniform_real_distribution<Real> dist(-1.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

DofPartition random_split(std::mt19937& rng, Index n) {
  std::vector<std::string> names(n);
  for (Index i = 0; i < n; ++i) names[i] = (rng() % 2 == 0) ? "f" : "c";
  names[0] = "f";
  names[n - 1] = "c";
  return DofPartition::from_names({"f", "c"}, names);
}

MgrStrategy exact_two_level() {
  MgrStrategy s;
  MgrLevelSpec lvl;
  lvl.f_fields = {"f"};
  lvl.interp = InterpKind::ideal;
  lvl.restrict_kind = RestrictKind::injection;
  lvl.f_relax = {SmootherKind::dense_lu, 1, 1.0, {}, {}, nullptr, false};
  s.levels.push_back(lvl);
  s.coarse.kind = CoarseSolverSpec::Kind::dense_lu;
  return s;
}

SpMat laplace5(Index n) {
  std::vector<Eigen::Triplet<Real>> t;
  const auto id = [n](Index i, Index j) { return i + n * j; };
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      t.emplace_back(id(i, j), id(i, j), 4.0);
      if (i > 0) t.emplace_back(id(i, j), id(i - 1, j), -1.0);
      if (i + 1 < n) t.emplace_back(id(i, j), id(i + 1, j), -1.0);
      if (j > 0) t.emplace_back(id(i, j), id(i, j - 1), -1.0);
      if (j + 1 < n) t.emplace_back(id(i, j), id(i, j + 1), -1.0);
    }
  return from_triplets(n * n, n * n, t);
}

std::pair<bool, std::string> check_mgr_exactness(bool corrupt) {
  std::mt19937 rng(4711);
  std::uniform_int_distribution<Index> size(20, 200);
  Real worst = 0.0;
  Index bad = 0, worst_iters = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = size(rng);
    const SpMat A = random_system(rng, n);
    const DofPartition part = random_split(rng, n);
    MgrHierarchy H = mgr_setup(A, part, exact_two_level());
    if (corrupt) H.levels[0].P = SpMat(1.01 * H.levels[0].P);
    const Vec b = random_load(rng, n);
    Vec x = Vec::Zero(n);
    KrylovConfig kc;
    kc.rel_tol = 1e-12;
    kc.max_iters = 10;
    const SolveReport rep = gmres(A, b, x, kc, mgr_preconditioner(H));
    const Real resid = (b - A * x).norm() / b.norm();
    worst = std::max(worst, resid);
    worst_iters = std::max(worst_iters, rep.iterations);
    if (!(rep.converged && rep.iterations == 1 && resid <= 1e-12)) ++bad;
  }
  const bool pass = bad == 0;
  std::string detail = fmt(
      "50 random systems, %d failed one-iteration reduction, worst iterations "
      "%d, worst true residual %.2e",
      (int)bad, (int)worst_iters, worst);
  if (corrupt) detail += " [transfer corrupted by 1%: failure is the point]";
  return {pass, detail};
}

std::pair<bool, std::string> check_ideal_schur() {
  std::mt19937 rng(1902);
  Real worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 30;
    const SpMat A = random_system(rng, n);
    const DofPartition part = random_split(rng, n);
    IndexList F, C;
    split(part, {"f"}, F, C);
    const SpMat P = build_interp(A, F, C, InterpKind::ideal);
    const SpMat R = build_restrict(A, F, C, RestrictKind::ideal);
    const SpMat S = coarse_operator(A, R, P);

    const Mat Ad(A);
    const Index nf = static_cast<Index>(F.size()), nc = static_cast<Index>(C.size());
    Mat A_FF(nf, nf), A_FC(nf, nc), A_CF(nc, nf), A_CC(nc, nc);
    for (Index a = 0; a < nf; ++a)
      for (Index b = 0; b < nf; ++b) A_FF(a, b) = Ad(F[a], F[b]);
    for (Index a = 0; a < nf; ++a)
      for (Index b = 0; b < nc; ++b) A_FC(a, b) = Ad(F[a], C[b]);
    for (Index a = 0; a < nc; ++a)
      for (Index b = 0; b < nf; ++b) A_CF(a, b) = Ad(C[a], F[b]);
    for (Index a = 0; a < nc; ++a)
      for (Index b = 0; b < nc; ++b) A_CC(a, b) = Ad(C[a], C[b]);
    const Mat S_ref = A_CC - A_CF * A_FF.inverse() * A_FC;
    const Real err = (Mat(S) - S_ref).cwiseAbs().maxCoeff() / S_ref.cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
  }
  return {worst <= 1e-12, fmt("10 random 30x30 systems, worst entrywise error %.2e", worst)};
}

Vec wavy_pressure(const mfd::HexMesh& m) {
  Vec p(m.num_cells());
  for (Index c = 0; c < m.num_cells(); ++c) {
    const Vec3& x = m.cell_centroid[c];
    p[c] = 1.5e5 - 4e4 * x.x() +
           2e4 * std::sin(5.0 * x.x() + 9.0 * x.y() + 4.0 * x.z());
  }
  return p;
}

std::pair<bool, std::string> check_tpfa_schur() {
  using namespace mfd;
  const HexMesh m = build_mesh(8, 8, 8, 0.2, 5);
  const FluidModel f;
  const Real dt = 1e3, kappa = 1e-10;
  const BoundaryCondition bc = bc_inlet_outlet(m, 2e5, 1e5);
  const MfdState st = consistent_state_from_pressure(m, f, bc, wavy_pressure(m), kappa);
  const HybridMfdSystem sys =
      assemble_hybrid(m, f, st, cell_mass(m, f, st.p), dt, kappa, InnerProduct::tpfa, bc);
  const CondensedSystem cond = static_condense(sys);

  Index offdiag = 0;
  for (Index r = 0; r < cond.Apipi.rows(); ++r)
    for (SpMat::InnerIterator it(cond.Apipi, r); it; ++it)
      if (it.col() != r) ++offdiag;

  const MgrHierarchy H =
      mgr_setup(cond.matrix(), cond.partition(), strategy_mgr_pi(InnerProduct::tpfa));
  const SpMat ref = tpfa_reference_assembly(m, f, st, dt, kappa, bc);
  const Real err = max_abs(SpMat(H.A_coarse - ref)) / max_abs(ref);
  const bool pass = offdiag == 0 && err <= 1e-12;
  return {pass, fmt("8^3 multiplier block stored off-diagonals %d, reduced operator vs "
                    "cell-centered reference %.2e",
                    (int)offdiag, err)};
}

std::pair<bool, std::string> check_static_condensation() {
  using namespace mfd;
  const HexMesh m = build_mesh(4, 4, 4, 0.2, 11);
  FluidModel f;
  f.rho0 = 1.0;
  f.compressibility = 0.05;
  f.mu0 = 1.0;
  f.mu_slope = 0.01;
  f.phi_slope = 0.01;
  f.p_ref = 1.0;
  f.gravity = Vec3(0, 0, -0.3);
  const Real kappa = 1.0, dt = 0.7;
  const BoundaryCondition bc = bc_inlet_outlet(m, 2.0, 1.0);
  Vec p(m.num_cells());
  for (Index c = 0; c < m.num_cells(); ++c) {
    const Vec3& x = m.cell_centroid[c];
    p[c] = 2.0 - x.x() + 0.3 * std::sin(5.0 * x.x() + 9.0 * x.y() + 4.0 * x.z());
  }
  const MfdState st = consistent_state_from_pressure(m, f, bc, p, kappa);
  const Vec mass = cell_mass(m, f, (st.p.array() * 0.98).matrix());

  Real worst = 0.0;
  for (InnerProduct ip : {InnerProduct::tpfa, InnerProduct::consistent}) {
    const HybridMfdSystem sys = assemble_hybrid(m, f, st, mass, dt, kappa, ip, bc);
    const Vec full = direct_solve(sys.full_matrix(), sys.full_rhs());
    const CondensedSystem cond = static_condense(sys);
    const Vec red = direct_solve(cond.matrix(), cond.rhs());
    const Vec dp = red.head(sys.n_p());
    const Vec dpi = red.tail(sys.n_pi());
    const Vec dw = recover_w(sys, dp, dpi);
    const Vec dp_full = full.segment(sys.n_w(), sys.n_p());
    const Vec dpi_full = full.tail(sys.n_pi());
    const Vec dw_full = full.head(sys.n_w());
    worst = std::max(worst, (dp - dp_full).norm() / dp_full.norm());
    worst = std::max(worst, (dpi - dpi_full).norm() / dpi_full.norm());
    worst = std::max(worst, (dw - dw_full).norm() / dw_full.norm());
  }
  return {worst <= 1e-10,
          fmt("4^3 full saddle vs condensed step, worst relative gap %.2e", worst)};
}

std::pair<bool, std::string> check_patch_test() {
  using namespace mfd;
  const Vec3 grad(3e4, -2e4, 1e4);
  const Real base = 1e5, dt = 1e3, kappa = 1e-10;
  FluidModel f;
  f.compressibility = 0.0;
  f.mu_slope = 0.0;
  f.phi_slope = 0.0;
  f.gravity = Vec3::Zero();
  const HexMesh m = build_mesh(6, 6, 6, 0.2, 23);
  const BoundaryCondition bc =
      bc_all_dirichlet(m, [&](const Vec3& x) { return base + grad.dot(x); });

  const auto solve_linear = [&](InnerProduct ip) {
    const Vec p0 = Vec::Constant(m.num_cells(), base);
    const MfdState st = consistent_state_from_pressure(m, f, bc, p0, kappa);
    const HybridMfdSystem sys =
        assemble_hybrid(m, f, st, cell_mass(m, f, st.p), dt, kappa, ip, bc);
    const CondensedSystem cond = static_condense(sys);
    const Vec red = direct_solve(cond.matrix(), cond.rhs());
    const Vec dp = red.head(sys.n_p());
    const Vec dpi = red.tail(sys.n_pi());
    MfdState out;
    out.p = st.p + dp;
    out.w = st.w + recover_w(sys, dp, dpi);
    return out;
  };

  const auto flux_error = [&](const MfdState& st) {
    Real err = 0.0, scale = 0.0;
    for (Index c = 0; c < m.num_cells(); ++c)
      for (Index l = 0; l < 6; ++l) {
        const Index fc = m.cell_faces[c][l];
        const Vec3 an = m.face_area[fc] * m.outward_sign(fc, c) * m.face_normal[fc];
        const Real exact = -kappa * an.dot(grad);
        err = std::max(err, std::abs(st.w[6 * c + l] - exact));
        scale = std::max(scale, std::abs(exact));
      }
    return err / scale;
  };

  const Real consistent_err = flux_error(solve_linear(InnerProduct::consistent));
  const MfdState tp = solve_linear(InnerProduct::tpfa);
  Real tpfa_p_err = 0.0;
  for (Index c = 0; c < m.num_cells(); ++c)
    tpfa_p_err =
        std::max(tpfa_p_err, std::abs(tp.p[c] - (base + grad.dot(m.cell_centroid[c]))));
  const bool pass = consistent_err <= 1e-10 && tpfa_p_err > 1e-6 * base;
  return {pass, fmt("20%%-perturbed 6^3 linear field: consistent relative flux error "
                    "%.2e, two-point pressure error %.2e of base %.0e",
                    consistent_err, tpfa_p_err, base)};
}

std::pair<bool, std::string> check_mfd_mesh_independence() {
  using namespace mfd;
  std::string detail;
  bool pass = true;
  const auto t0 = std::chrono::steady_clock::now();
  for (InnerProduct ip : {InnerProduct::tpfa, InnerProduct::consistent}) {
    Index counts[3];
    int k = 0;
    for (Index n : {8, 16, 32}) {
      MfdConfig cfg;
      cfg.nx = cfg.ny = cfg.nz = n;
      cfg.perturbation = 0.2;
      cfg.inner = ip;
      const ProblemBundle b = generate_bundle(cfg);
      const MgrStrategy s =
          ip == InnerProduct::tpfa ? strategy_mgr_pi(ip) : strategy_mgr_p(ip);
      const MgrHierarchy H = mgr_setup(b.matrix, b.partition, s);
      KrylovConfig kc;
      kc.rel_tol = 1e-7;
      kc.max_iters = 200;
      Vec x = Vec::Zero(b.matrix.rows());
      const SolveReport r = gmres(b.matrix, b.rhs, x, kc, mgr_preconditioner(H));
      if (!r.converged) pass = false;
      counts[k++] = r.iterations;
    }
    const Index limit = ip == InnerProduct::tpfa ? 30 : 40;
    const Real lo = static_cast<Real>(std::min({counts[0], counts[1], counts[2]}));
    const Real hi = static_cast<Real>(std::max({counts[0], counts[1], counts[2]}));
    if (hi > static_cast<Real>(limit) || hi / lo > 1.5) pass = false;
    detail += fmt("%s %d/%d/%d (ratio %.2f, limit %d) ",
                  ip == InnerProduct::tpfa ? "multiplier/two-point" : "pressure/consistent",
                  (int)counts[0], (int)counts[1], (int)counts[2], hi / lo, (int)limit);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 180.0) pass = false;
  detail += fmt("in %.1f s (budget 180)", secs);
  return {pass, detail};
}

std::pair<bool, std::string> check_compositional() {
  using namespace comp;
  bool pass = true;
  Real worst_exact = 0.0;
  Index counts[3];
  int k = 0;
  bool wells_clean = true;
  Index total_well_f = 0;

  CompConfig uniform;
  uniform.nx = uniform.ny = uniform.nz = 8;
  uniform.perm = PermKind::uniform;
  uniform.seed = 101;
  std::vector<CompConfig> cfgs = {uniform};
  for (Index n : {8, 12, 16}) {
    CompConfig c;
    c.nx = c.ny = c.nz = n;
    cfgs.push_back(c);
  }

  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const ProblemBundle b = generate_bundle(cfgs[i]);
    // first-level reduction must be exact: the eliminated block is diagonal
    IndexList F, C;
    split(b.partition, {"rho2"}, F, C);
    const SpMat P = build_interp(b.matrix, F, C, InterpKind::jacobi);
    const SpMat R = build_restrict(b.matrix, F, C, RestrictKind::injection);
    const SpMat S = coarse_operator(b.matrix, R, P);
    const SpMat S_ref = schur_jacobi_direct(b.matrix, F, C);
    worst_exact = std::max(worst_exact, max_abs(SpMat(S - S_ref)) / max_abs(S_ref));

    const MgrHierarchy H = mgr_setup(b.matrix, b.partition, strategy_compositional(true));
    const std::set<Index> wells(b.well_rows.begin(), b.well_rows.end());
    for (const auto& lvl : H.levels) {
      const SpMat A_FF = extract(lvl.A, lvl.F, lvl.F);
      const Vec d = diagonal(A_FF);
      if (d.cwiseAbs().minCoeff() == 0.0) wells_clean = false;
      for (Index fidx : lvl.F)
        if (wells.count(lvl.finest_ids[fidx])) ++total_well_f;
    }
    if (H.coarse_finest_ids.size() != b.well_rows.size()) wells_clean = false;

    if (i > 0) {
      KrylovConfig kc;
      kc.rel_tol = 1e-6;
      kc.max_iters = 200;
      Vec x = Vec::Zero(b.matrix.rows());
      const SolveReport r = gmres(b.matrix, b.rhs, x, kc, mgr_preconditioner(H));
      if (!r.converged || r.iterations > 40) pass = false;
      counts[k++] = r.iterations;
    }
  }
  if (total_well_f != 0) wells_clean = false;
  const Real lo = static_cast<Real>(std::min({counts[0], counts[1], counts[2]}));
  const Real hi = static_cast<Real>(std::max({counts[0], counts[1], counts[2]}));
  if (worst_exact > 1e-12 || !wells_clean || hi / lo > 1.5) pass = false;
  return {pass,
          fmt("level-1 reduction error %.2e over %d instances; staged solve %d/%d/%d "
              "iterations (ratio %.2f); well rows in F-sets %d, zero F-diagonals %s",
              worst_exact, (int)cfgs.size(), (int)counts[0], (int)counts[1],
              (int)counts[2], hi / lo, (int)total_well_f, wells_clean ? "none" : "FOUND")};
}

std::pair<bool, std::string> check_fracture() {
  using namespace frac;
  bool pass = true;

  FracConfig small;
  small.nx = small.ny = 32;
  const ProblemBundle sb = generate_bundle(small);
  const MgrHierarchy SH = mgr_setup(sb.matrix, sb.partition, strategy_mgr_u(), &sb.unknown_map);
  IndexList F, C;
  split(sb.partition, {"u"}, F, C);
  const SpMat S_ref = schur_jacobi_direct(sb.matrix, F, C);
  const Real schur_err = max_abs(SpMat(SH.A_coarse - S_ref)) / max_abs(S_ref);
  if (schur_err > 1e-12) pass = false;

  const auto iters = [&](const ProblemBundle& b, const MgrStrategy& s, Real tol) {
    const MgrHierarchy H = mgr_setup(b.matrix, b.partition, s, &b.unknown_map);
    KrylovConfig kc;
    kc.rel_tol = tol;
    kc.max_iters = 300;
    Vec x = Vec::Zero(b.matrix.rows());
    const SolveReport r = gmres(b.matrix, b.rhs, x, kc, mgr_preconditioner(H));
    return r.converged ? r.iterations : Index(-1);
  };

  const FracConfig base;  // 64 x 64
  const ProblemBundle b64 = generate_bundle(base);
  const Index iu = iters(b64, strategy_mgr_u(), 1e-4);
  const Index ip = iters(b64, strategy_mgr_p_frac(), 1e-4);
  if (iu < 0 || ip < 0 || iu > ip || iu > 60 || ip > 60) pass = false;

  Index counts[3];
  int k = 0;
  for (Index m : {32, 64, 128}) {
    FracConfig cfg;
    cfg.nx = cfg.ny = m;
    const ProblemBundle b = generate_bundle(cfg);
    const Index it = iters(b, strategy_mgr_u(), 1e-6);
    if (it < 0) pass = false;
    counts[k++] = it;
  }
  const Real lo = static_cast<Real>(std::min({counts[0], counts[1], counts[2]}));
  const Real hi = static_cast<Real>(std::max({counts[0], counts[1], counts[2]}));
  if (hi / lo > 1.5) pass = false;
  return {pass,
          fmt("64^2 tol 1e-4: displacement-first %d vs pressure-first %d iterations; "
              "reduced operator error %.2e; refinement %d/%d/%d (ratio %.2f)",
              (int)iu, (int)ip, schur_err, (int)counts[0], (int)counts[1],
              (int)counts[2], hi / lo)};
}

std::pair<bool, std::string> check_griffith() {
  using namespace frac;
  const FracConfig cfg;
  const FracSystem sys = build_frac_system(cfg);
  IndexList U(sys.n_u), P(sys.n_p);
  for (Index i = 0; i < sys.n_u; ++i) U[i] = i;
  for (Index j = 0; j < sys.n_p; ++j) P[j] = sys.n_u + j;
  const SpMat A_uu = extract(sys.A, U, U);
  const SpMat A_up = extract(sys.A, U, P);
  const Real pbar = 1e6;
  const Vec u = direct_solve(A_uu, Vec(-(A_up * Vec::Constant(sys.n_p, pbar))));
  Vec full = Vec::Zero(sys.A.rows());
  full.head(sys.n_u) = u;
  const Real wmax = apertures(sys, full).maxCoeff();
  const Real L = cfg.half_length * cfg.domain;
  const Real ref = 4.0 * pbar * (1.0 - cfg.poisson * cfg.poisson) * L / cfg.young;
  const Real rel = (wmax - ref) / ref;
  return {std::abs(rel) <= 0.25,
          fmt("64^2 uniform-pressure slit: max opening %.3e vs analytic %.3e "
              "(relative gap %+.1f%%)",
              wmax, ref, 100.0 * rel)};
}

std::pair<bool, std::string> check_amg_poisson() {
  std::mt19937 rng(99);
  Index counts[3];
  int k = 0;
  bool pass = true;
  for (Index n : {16, 32, 64}) {
    const SpMat A = laplace5(n);
    AmgConfig cfg;
    const AmgHierarchy H = amg_setup(A, cfg);
    const Vec b = random_load(rng, A.rows());
    Vec x = Vec::Zero(A.rows());
    KrylovConfig kc;
    kc.rel_tol = 1e-8;
    kc.max_iters = 100;
    const LinOp M = [&H](const Vec& v) -> Vec { return amg_vcycle(H, v); };
    const SolveReport r = gmres(A, b, x, kc, M);
    if (!r.converged || r.iterations > 20) pass = false;
    counts[k++] = r.iterations;
  }
  const Real lo = static_cast<Real>(std::min({counts[0], counts[1], counts[2]}));
  const Real hi = static_cast<Real>(std::max({counts[0], counts[1], counts[2]}));
  if (hi / lo > 1.5) pass = false;
  return {pass, fmt("2D Poisson 16^2/32^2/64^2 at tol 1e-8: %d/%d/%d iterations "
                    "(ratio %.2f, limit 20)",
                    (int)counts[0], (int)counts[1], (int)counts[2], hi / lo)};
}

}  // namespace

std::vector<CheckResult> run_acceptance_checks(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  out.push_back(timed("mgr-exactness-two-level",
                      [&] { return check_mgr_exactness(opts.corrupt_transfer); }));
  out.push_back(timed("ideal-coarse-equals-dense-schur", check_ideal_schur));
  out.push_back(timed("tpfa-pi-schur-equals-cell-tpfa", check_tpfa_schur));
  out.push_back(timed("static-condensation-equivalence", check_static_condensation));
  out.push_back(timed("consistency-patch-test", check_patch_test));
  out.push_back(timed("mfd-mesh-independence", check_mfd_mesh_independence));
  out.push_back(timed("compositional-structure-and-convergence", check_compositional));
  out.push_back(timed("fracture-mgr-strategies", check_fracture));
  out.push_back(timed("griffith-opening", check_griffith));
  out.push_back(timed("amg-poisson-scaling", check_amg_poisson));
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace mgrkit::verify

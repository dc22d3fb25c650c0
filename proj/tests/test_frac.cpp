#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <set>

#include "mgrkit/krylov.hpp"
#include "mgrkit/problems/frac.hpp"
#include "test_util.hpp"

using namespace mgrkit;
using namespace mgrkit::frac;
using namespace testutil;

namespace {

void split_dofs(const FracSystem& sys, IndexList& U, IndexList& P) {
  U.resize(sys.n_u);
  P.resize(sys.n_p);
  for (Index i = 0; i < sys.n_u; ++i) U[i] = i;
  for (Index k = 0; k < sys.n_p; ++k) P[k] = sys.n_u + k;
}

SolveReport solve(const ProblemBundle& b, const MgrStrategy& s, Real tol, Vec& x) {
  const MgrHierarchy H = mgr_setup(b.matrix, b.partition, s, &b.unknown_map);
  KrylovConfig kc;
  kc.rel_tol = tol;
  kc.max_iters = 300;
  x = Vec::Zero(b.matrix.rows());
  return gmres(b.matrix, b.rhs, x, kc, mgr_preconditioner(H));
}

}  // namespace

TEST_CASE("config validation rejects bad geometry and material data") {
  FracConfig cfg;
  cfg.ny = 63;
  CHECK_THROWS(build_frac_system(cfg));
  cfg = FracConfig{};
  cfg.poisson = 0.5;
  CHECK_THROWS(build_frac_system(cfg));
  cfg = FracConfig{};
  cfg.half_length = 0.5;  // slit would reach the boundary
  CHECK_THROWS(build_frac_system(cfg));
  cfg = FracConfig{};
  cfg.nx = cfg.ny = 2;  // grid cannot carry two slit edges
  CHECK_THROWS(build_frac_system(cfg));
  cfg = FracConfig{};
  cfg.aperture0 = 0.0;
  CHECK_THROWS(build_frac_system(cfg));
  cfg = FracConfig{};
  cfg.dt = -1.0;
  CHECK_THROWS(build_frac_system(cfg));
  cfg = FracConfig{};
  cfg.source_cell = 16;  // only 16 cells, ids 0..15
  CHECK_THROWS(build_frac_system(cfg));
}

TEST_CASE("dof accounting and slit cell map") {
  FracConfig cfg;
  cfg.nx = cfg.ny = 16;
  const FracSystem sys = build_frac_system(cfg);
  // 15x15 interior nodes plus 3 duplicated slit nodes, two dofs each
  CHECK(sys.n_u == 2 * (15 * 15 + 3));
  CHECK(sys.n_p == 4);
  CHECK(sys.A.rows() == sys.n_u + sys.n_p);
  REQUIRE(sys.cells.size() == 4);
  // tips are shared nodes, interior pairs are distinct duplicates
  CHECK(sys.cells.front().top_left == sys.cells.front().bot_left);
  CHECK(sys.cells.back().top_right == sys.cells.back().bot_right);
  for (std::size_t k = 0; k + 1 < sys.cells.size(); ++k) {
    CHECK(sys.cells[k].top_right != sys.cells[k].bot_right);
    CHECK(sys.cells[k].top_right == sys.cells[k + 1].top_left);
    CHECK(sys.cells[k].bot_right == sys.cells[k + 1].bot_left);
  }
  CHECK(sys.partition.field_order == std::vector<std::string>{"u", "p"});
  REQUIRE(static_cast<Index>(sys.unknown_map.size()) == sys.A.rows());
  for (Index d = 0; d < sys.n_u; ++d) CHECK(sys.unknown_map[d] == d % 2);
  for (Index d = sys.n_u; d < sys.A.rows(); ++d) CHECK(sys.unknown_map[d] == 0);
}

TEST_CASE("displacement block is exactly symmetric and positive definite") {
  FracConfig cfg;
  cfg.nx = cfg.ny = 10;
  const FracSystem sys = build_frac_system(cfg);
  IndexList U, P;
  split_dofs(sys, U, P);
  const SpMat A_uu = extract(sys.A, U, U);
  CHECK(max_abs(SpMat(A_uu - transpose(A_uu))) == 0.0);
  const Eigen::SelfAdjointEigenSolver<Mat> eig(Mat(to_dense(A_uu)));
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("pressure column block loads the slit faces equally and oppositely") {
  FracConfig cfg;
  cfg.nx = cfg.ny = 32;
  const FracSystem sys = build_frac_system(cfg);
  IndexList U, P;
  split_dofs(sys, U, P);
  const SpMat A_up = extract(sys.A, U, P);
  const SpMat A_pu = extract(sys.A, P, U);

  std::set<std::pair<Index, Index>> pairs;
  for (const FracCell& c : sys.cells) {
    if (c.top_left != c.bot_left) pairs.insert({c.top_left, c.bot_left});
    if (c.top_right != c.bot_right) pairs.insert({c.top_right, c.bot_right});
  }
  CHECK(pairs.size() == sys.cells.size() - 1);
  const Mat D_up = to_dense(A_up);
  for (const auto& [top, bot] : pairs) {
    CHECK((D_up.row(top) + D_up.row(bot)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(D_up.row(top).cwiseAbs().maxCoeff() > 0.0);
    // the load acts on vertical dofs only
    CHECK(D_up.row(top - 1).cwiseAbs().maxCoeff() == 0.0);
  }

  // aperture-rate rows are the transposed loads scaled by -rho/dt
  const SpMat R = SpMat(A_pu + (cfg.rho_fluid / cfg.dt) * SpMat(transpose(A_up)));
  CHECK(max_abs(R) <= 1e-14 * max_abs(A_pu));
}

TEST_CASE("slit pressure block is storage plus channel flow") {
  FracConfig cfg;
  cfg.nx = cfg.ny = 32;
  const FracSystem sys = build_frac_system(cfg);
  IndexList U, P;
  split_dofs(sys, U, P);
  const Mat B = to_dense(extract(sys.A, P, P));
  const Real hx = cfg.domain / static_cast<Real>(cfg.nx);
  const Real storage = cfg.rho_fluid / cfg.bulk_fluid * cfg.aperture0 * hx / cfg.dt;
  const Real T = cfg.rho_fluid * std::pow(cfg.aperture0, 3) / (12.0 * cfg.viscosity * hx);
  const Index m = sys.n_p;
  Mat ref = Mat::Zero(m, m);
  for (Index k = 0; k < m; ++k) ref(k, k) = storage;
  for (Index k = 0; k + 1 < m; ++k) {
    ref(k, k) += T;
    ref(k + 1, k + 1) += T;
    ref(k, k + 1) -= T;
    ref(k + 1, k) -= T;
  }
  CHECK((B - ref).cwiseAbs().maxCoeff() <= 1e-14 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("uniform slit pressure opens to the plane-strain analytic width") {
  const FracConfig cfg;  // 64 x 64, slit half-length an eighth of the domain
  const FracSystem sys = build_frac_system(cfg);
  IndexList U, P;
  split_dofs(sys, U, P);
  const SpMat A_uu = extract(sys.A, U, U);
  const SpMat A_up = extract(sys.A, U, P);
  const Real pbar = 1e6;
  const Vec u = direct_solve(A_uu, Vec(-(A_up * Vec::Constant(sys.n_p, pbar))));
  Vec full = Vec::Zero(sys.A.rows());
  full.head(sys.n_u) = u;
  const Vec w = apertures(sys, full);
  const Real L = cfg.half_length * cfg.domain;
  const Real ref = 4.0 * pbar * (1.0 - cfg.poisson * cfg.poisson) * L / cfg.young;
  CHECK(w.maxCoeff() == doctest::Approx(ref).epsilon(0.25));
  // widest at the middle, closed toward the tips
  CHECK(w[0] < w[sys.n_p / 2]);
  CHECK(w[sys.n_p - 1] < w[sys.n_p / 2]);
  CHECK(w.minCoeff() > 0.0);

  // doubling the pressure doubles the opening
  const Vec u2 = direct_solve(A_uu, Vec(-(A_up * Vec::Constant(sys.n_p, 2.0 * pbar))));
  Vec full2 = Vec::Zero(sys.A.rows());
  full2.head(sys.n_u) = u2;
  const Vec w2 = apertures(sys, full2);
  CHECK((w2 - 2.0 * w).cwiseAbs().maxCoeff() <= 1e-10 * w.maxCoeff());
}

TEST_CASE("displacement-first coarse grid equals the diagonal-scaled reduction") {
  FracConfig cfg;
  cfg.nx = cfg.ny = 32;
  const ProblemBundle b = generate_bundle(cfg);
  const MgrHierarchy H = mgr_setup(b.matrix, b.partition, strategy_mgr_u(), &b.unknown_map);
  REQUIRE(H.levels.size() == 1);
  IndexList F, C;
  split(b.partition, {"u"}, F, C);
  const SpMat S = schur_jacobi_direct(b.matrix, F, C);
  CHECK(H.A_coarse.rows() == 8);  // one pressure dof per slit cell
  CHECK(max_abs(SpMat(H.A_coarse - S)) <= 1e-12 * max_abs(S));
}

TEST_CASE("strategy composition") {
  const MgrStrategy u = strategy_mgr_u();
  REQUIRE(u.levels.size() == 1);
  CHECK(u.levels[0].f_fields == std::vector<std::string>{"u"});
  CHECK(u.levels[0].interp == InterpKind::jacobi);
  CHECK(u.levels[0].restrict_kind == RestrictKind::injection);
  CHECK(u.levels[0].f_relax.kind == SmootherKind::amg_vcycle);
  CHECK(u.levels[0].f_relax.sweeps == 1);
  CHECK(u.levels[0].f_relax.use_unknown_map);
  CHECK(u.coarse.kind == CoarseSolverSpec::Kind::amg_vcycle);
  CHECK(!u.coarse.use_unknown_map);

  const MgrStrategy p = strategy_mgr_p_frac();
  REQUIRE(p.levels.size() == 1);
  CHECK(p.levels[0].f_fields == std::vector<std::string>{"p"});
  CHECK(p.levels[0].f_relax.kind == SmootherKind::amg_vcycle);
  CHECK(!p.levels[0].f_relax.use_unknown_map);
  CHECK(p.coarse.kind == CoarseSolverSpec::Kind::amg_vcycle);
  CHECK(p.coarse.use_unknown_map);
}

TEST_CASE("displacement-first reduction converges no slower than pressure-first") {
  FracConfig cfg;  // 64 x 64 default
  const ProblemBundle b = generate_bundle(cfg);
  Vec xu, xp;
  const SolveReport ru = solve(b, strategy_mgr_u(), 1e-4, xu);
  const SolveReport rp = solve(b, strategy_mgr_p_frac(), 1e-4, xp);
  CHECK(ru.converged);
  CHECK(rp.converged);
  CHECK(ru.iterations <= rp.iterations);
  CHECK(ru.iterations <= 60);
  CHECK(rp.iterations <= 60);

  // same linear system, same answer: tighten and compare
  Vec yu, yp;
  solve(b, strategy_mgr_u(), 1e-10, yu);
  solve(b, strategy_mgr_p_frac(), 1e-10, yp);
  CHECK((yu - yp).norm() <= 1e-6 * yu.norm());
}

TEST_CASE("iterations stay flat under refinement") {
  Index iters[3];
  int k = 0;
  for (Index m : {32, 64, 128}) {
    FracConfig cfg;
    cfg.nx = cfg.ny = m;
    const ProblemBundle b = generate_bundle(cfg);
    Vec x;
    const SolveReport r = solve(b, strategy_mgr_u(), 1e-6, x);
    CHECK(r.converged);
    CHECK((b.matrix * x - b.rhs).norm() <= 1.01e-6 * b.rhs.norm());
    iters[k++] = r.iterations;
  }
  const Real lo = static_cast<Real>(std::min({iters[0], iters[1], iters[2]}));
  const Real hi = static_cast<Real>(std::max({iters[0], iters[1], iters[2]}));
  CHECK(hi / lo <= 1.5);
}

TEST_CASE("bundle: deterministic, metadata carries the slit map, zero source is equilibrium") {
  FracConfig cfg;
  cfg.nx = cfg.ny = 32;
  const ProblemBundle a = generate_bundle(cfg);
  const ProblemBundle b = generate_bundle(cfg);
  CHECK(same_matrix(a.matrix, b.matrix));
  CHECK(a.rhs == b.rhs);
  CHECK(a.problem == "frac");
  CHECK(a.params_json.find("\"cell_pairs\":[") != std::string::npos);
  CHECK(a.params_json.find("\"slit_cells\":8") != std::string::npos);
  CHECK(!a.warnings.empty());
  CHECK(a.well_rows.empty());
  // injection mass lands in the middle slit cell and nowhere else
  Index nonzeros = 0;
  for (Index i = 0; i < a.rhs.size(); ++i)
    if (a.rhs[i] != 0.0) ++nonzeros;
  CHECK(nonzeros == 1);
  CHECK(a.rhs[a.matrix.rows() - 8 + 4] == cfg.source_rate);

  FracConfig still = cfg;
  still.source_rate = 0.0;
  const ProblemBundle eq = generate_bundle(still);
  CHECK(eq.rhs.cwiseAbs().maxCoeff() == 0.0);
  CHECK((eq.matrix * Vec::Zero(eq.matrix.rows()) - eq.rhs).norm() == 0.0);

  const std::string dir =
      (std::filesystem::temp_directory_path() / "mgrkit_frac_bundle").string();
  write_bundle(a, dir);
  const ProblemBundle back = read_bundle(dir);
  CHECK(same_matrix(a.matrix, back.matrix));
  CHECK(back.unknown_map == a.unknown_map);
  CHECK(back.partition.field_order == a.partition.field_order);
  std::filesystem::remove_all(dir);
}

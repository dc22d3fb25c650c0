#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "mgrkit/mgr.hpp"
#include "test_util.hpp"

using namespace mgrkit;
using namespace testutil;

namespace {

SpMat two_by_two() {
  Mat A(2, 2);
  A << 4, 1, 1, 3;
  return dense_to_sparse(A);
}

SpMat three_by_three() {
  Mat A(3, 3);
  A << 2, 0, 1, 0, 4, 2, 1, 2, 8;
  return dense_to_sparse(A);
}

SmootherSpec exact_ff_relax() { return {SmootherKind::dense_lu, 1, 1.0, {}, {}, nullptr, false}; }
SmootherSpec jacobi_relax(Index sweeps = 1) {
  return {SmootherKind::jacobi, sweeps, 1.0, {}, {}, nullptr, false};
}

}  // namespace

TEST_CASE("split by field labels") {
  DofPartition part = DofPartition::from_names({"p", "pi"}, {"p", "pi", "p", "pi"});
  IndexList F, C;
  split(part, {"pi"}, F, C);
  REQUIRE(F.size() == 2);
  REQUIRE(C.size() == 2);
  CHECK(F[0] == 1);
  CHECK(F[1] == 3);
  CHECK(C[0] == 0);
  CHECK(C[1] == 2);

  DofPartition single = DofPartition::from_names({"p"}, {"p", "p"});
  CHECK_THROWS(split(single, {"p"}, F, C));
  CHECK_THROWS(split(part, {"rho"}, F, C));

  DofPartition comp =
      DofPartition::from_names({"p", "rho1", "rho2", "well"},
                               {"p", "rho1", "rho2", "p", "rho1", "rho2", "well", "well"});
  split(comp, {"rho2"}, F, C);
  REQUIRE(F.size() == 2);
  CHECK(F[0] == 2);
  CHECK(F[1] == 5);
}

TEST_CASE("build_interp") {
  SpMat A = two_by_two();
  SpMat P = build_interp(A, {0}, {1}, InterpKind::jacobi);
  REQUIRE(P.rows() == 2);
  REQUIRE(P.cols() == 1);
  CHECK(P.coeff(0, 0) == -0.25);
  CHECK(P.coeff(1, 0) == 1.0);

  // Decoupled A_FC = 0: F-rows vanish, C-rows are identity.
  SpMat D = from_triplets(3, 3, {{0, 0, 2.0}, {1, 1, 3.0}, {2, 2, 4.0}});
  SpMat Pd = build_interp(D, {0}, {1, 2}, InterpKind::ideal);
  CHECK(Pd.nonZeros() == 2);
  CHECK(Pd.coeff(1, 0) == 1.0);
  CHECK(Pd.coeff(2, 1) == 1.0);

  // Ideal on the 3x3 example: F-rows are -diag(2,4)^{-1} [1;2] = [-0.5;-0.5].
  SpMat P3 = build_interp(three_by_three(), {0, 1}, {2}, InterpKind::ideal);
  CHECK(P3.coeff(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(P3.coeff(1, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(P3.coeff(2, 0) == 1.0);
}

TEST_CASE("build_restrict") {
  SpMat A = two_by_two();
  SpMat Rinj = build_restrict(A, {0}, {1}, RestrictKind::injection);
  REQUIRE(Rinj.rows() == 1);
  REQUIRE(Rinj.cols() == 2);
  CHECK(Rinj.nonZeros() == 1);
  CHECK(Rinj.coeff(0, 1) == 1.0);

  SpMat Rj = build_restrict(A, {0}, {1}, RestrictKind::jacobi);
  CHECK(Rj.coeff(0, 0) == -0.25);
  CHECK(Rj.coeff(0, 1) == 1.0);

  SpMat R3 = build_restrict(three_by_three(), {0, 1}, {2}, RestrictKind::ideal);
  CHECK(R3.coeff(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(R3.coeff(0, 1) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(R3.coeff(0, 2) == 1.0);
}

TEST_CASE("coarse operator") {
  SpMat A = two_by_two();
  SpMat P = build_interp(A, {0}, {1}, InterpKind::ideal);
  SpMat R = build_restrict(A, {0}, {1}, RestrictKind::ideal);
  SpMat S = coarse_operator(A, R, P);
  REQUIRE(S.rows() == 1);
  CHECK(S.coeff(0, 0) == doctest::Approx(2.75).epsilon(1e-14));

  SpMat A3 = three_by_three();
  SpMat P3 = build_interp(A3, {0, 1}, {2}, InterpKind::ideal);
  SpMat R3 = build_restrict(A3, {0, 1}, {2}, RestrictKind::ideal);
  CHECK(coarse_operator(A3, R3, P3).coeff(0, 0) == doctest::Approx(6.5).epsilon(1e-14));

  // Block-diagonal system: S = A_CC.
  SpMat D = from_triplets(4, 4, {{0, 0, 2.0}, {1, 1, 3.0}, {2, 2, 4.0}, {3, 3, 5.0}});
  IndexList F = {0, 1}, C = {2, 3};
  SpMat Sd = coarse_operator(D, build_restrict(D, F, C, RestrictKind::ideal),
                             build_interp(D, F, C, InterpKind::ideal));
  CHECK(same_matrix(Sd, extract(D, C, C)));
}

TEST_CASE("ideal coarse operator equals the dense Schur complement") {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    SpMat A = random_nonsingular(rng, 30);
    IndexList F, C;
    for (Index i = 0; i < 30; ++i) (i % 3 == 0 ? F : C).push_back(i);
    SpMat S = coarse_operator(A, build_restrict(A, F, C, RestrictKind::ideal),
                              build_interp(A, F, C, InterpKind::ideal));
    Mat Ad = to_dense(A);
    Mat A_FF(F.size(), F.size()), A_FC(F.size(), C.size()), A_CF(C.size(), F.size()),
        A_CC(C.size(), C.size());
    for (size_t i = 0; i < F.size(); ++i)
      for (size_t j = 0; j < F.size(); ++j) A_FF(i, j) = Ad(F[i], F[j]);
    for (size_t i = 0; i < F.size(); ++i)
      for (size_t j = 0; j < C.size(); ++j) A_FC(i, j) = Ad(F[i], C[j]);
    for (size_t i = 0; i < C.size(); ++i)
      for (size_t j = 0; j < F.size(); ++j) A_CF(i, j) = Ad(C[i], F[j]);
    for (size_t i = 0; i < C.size(); ++i)
      for (size_t j = 0; j < C.size(); ++j) A_CC(i, j) = Ad(C[i], C[j]);
    Mat schur = A_CC - A_CF * A_FF.inverse() * A_FC;
    CHECK((to_dense(S) - schur).norm() <= 1e-12 * schur.norm());
  }
}

TEST_CASE("schur_jacobi_direct matches the galerkin product") {
  std::mt19937 rng(23);
  SpMat A = random_nonsingular(rng, 40);
  IndexList F, C;
  for (Index i = 0; i < 40; ++i) (i % 2 == 0 ? F : C).push_back(i);
  SpMat S_direct = schur_jacobi_direct(A, F, C);
  SpMat S_rap = coarse_operator(A, build_restrict(A, F, C, RestrictKind::injection),
                                build_interp(A, F, C, InterpKind::jacobi));
  CHECK((to_dense(S_direct) - to_dense(S_rap)).norm() <= 1e-12 * to_dense(S_rap).norm());
}

TEST_CASE("declared block layout reproduces the dense ideal transfers") {
  // A_FF is block diagonal with 2x2 blocks; the layout route must agree with
  // the dense factorization route.
  std::mt19937 rng(31);
  const Index nf = 8, nc = 5, n = nf + nc;
  std::vector<Triplet> t;
  for (Index b = 0; b < nf / 2; ++b) {
    Mat blk = random_dense(rng, 2, 2) + 4.0 * Mat::Identity(2, 2);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j) t.push_back({2 * b + i, 2 * b + j, blk(i, j)});
  }
  std::uniform_real_distribution<Real> dist(-1.0, 1.0);
  for (Index i = 0; i < nf; ++i) t.push_back({i, nf + (i % nc), dist(rng)});
  for (Index j = 0; j < nc; ++j) {
    t.push_back({nf + j, nf + j, 6.0});
    t.push_back({nf + j, (7 * j) % nf, dist(rng)});
  }
  SpMat A = from_triplets(n, n, t);
  IndexList F(nf), C(nc);
  std::iota(F.begin(), F.end(), 0);
  std::iota(C.begin(), C.end(), nf);

  BlockLayout layout = BlockLayout::from_sizes(std::vector<Index>(nf / 2, 2));
  SpMat P_layout = build_interp(A, F, C, InterpKind::ideal, &layout);
  SpMat P_dense = build_interp(A, F, C, InterpKind::ideal);
  CHECK((to_dense(P_layout) - to_dense(P_dense)).norm() <= 1e-13);

  SpMat R_layout = build_restrict(A, F, C, RestrictKind::ideal, &layout);
  SpMat R_dense = build_restrict(A, F, C, RestrictKind::ideal);
  CHECK((to_dense(R_layout) - to_dense(R_dense)).norm() <= 1e-13);
}

TEST_CASE("ideal transfers on a large non-diagonal A_FF are rejected") {
  SpMat A = tridiag(4200, -1.0, 2.5, -1.0);
  IndexList F, C;
  for (Index i = 0; i < 4200; ++i) (i < 2100 ? F : C).push_back(i);
  CHECK_THROWS_WITH(build_interp(A, F, C, InterpKind::ideal), doctest::Contains("ideal"));
}

TEST_CASE("mgr_setup bookkeeping and determinism") {
  DofPartition part = DofPartition::from_names({"a", "b"}, {"a", "b", "a", "b", "a", "b"});
  std::mt19937 rng(3);
  SpMat A = random_nonsingular(rng, 6);

  MgrStrategy strat;
  MgrLevelSpec lvl;
  lvl.f_fields = {"b"};
  lvl.interp = InterpKind::jacobi;
  lvl.restrict_kind = RestrictKind::injection;
  lvl.f_relax = jacobi_relax();
  strat.levels.push_back(lvl);
  strat.coarse.kind = CoarseSolverSpec::Kind::dense_lu;

  MgrHierarchy H1 = mgr_setup(A, part, strat);
  CHECK(H1.num_reduction_levels() == 1);
  CHECK(H1.A_coarse.rows() == 3);
  CHECK(H1.levels[0].F.size() == 3);
  // Instrumentation: coarse dofs are the original "a" dofs.
  REQUIRE(H1.coarse_finest_ids.size() == 3);
  CHECK(H1.coarse_finest_ids[0] == 0);
  CHECK(H1.coarse_finest_ids[1] == 2);
  CHECK(H1.coarse_finest_ids[2] == 4);

  MgrHierarchy H2 = mgr_setup(A, part, strat);
  CHECK(same_matrix(H1.levels[0].P, H2.levels[0].P));
  CHECK(same_matrix(H1.levels[0].R, H2.levels[0].R));
  CHECK(same_matrix(H1.A_coarse, H2.A_coarse));

  // Galerkin identity as stored.
  CHECK(same_matrix(H1.A_coarse, matmul(H1.levels[0].R, matmul(H1.levels[0].A, H1.levels[0].P))));

  // Eliminating the same field twice is rejected.
  MgrStrategy twice = strat;
  twice.levels.push_back(lvl);
  CHECK_THROWS(mgr_setup(A, part, twice));
}

TEST_CASE("single-level hierarchy applies the coarse solver") {
  std::mt19937 rng(7);
  SpMat A = random_nonsingular(rng, 5);
  DofPartition part = DofPartition::from_names({"x"}, std::vector<std::string>(5, "x"));
  MgrStrategy strat;  // no reduction levels
  strat.coarse.kind = CoarseSolverSpec::Kind::dense_lu;
  MgrHierarchy H = mgr_setup(A, part, strat);
  Vec v = random_vec(rng, 5);
  Vec z = mgr_apply(H, v);
  CHECK((A * z - v).norm() <= 1e-12 * v.norm());
}

TEST_CASE("two-level exact reduction applies the exact inverse") {
  SpMat A = two_by_two();
  DofPartition part = DofPartition::from_names({"f", "c"}, {"f", "c"});
  MgrStrategy strat;
  MgrLevelSpec lvl;
  lvl.f_fields = {"f"};
  lvl.interp = InterpKind::ideal;
  lvl.restrict_kind = RestrictKind::injection;
  lvl.f_relax = exact_ff_relax();
  strat.levels.push_back(lvl);
  strat.coarse.kind = CoarseSolverSpec::Kind::dense_lu;
  MgrHierarchy H = mgr_setup(A, part, strat);

  Vec v(2);
  v << 1, 0;
  Vec z = mgr_apply(H, v);
  CHECK(z[0] == doctest::Approx(3.0 / 11.0).epsilon(1e-14));
  CHECK(z[1] == doctest::Approx(-1.0 / 11.0).epsilon(1e-14));

  // Jacobi interpolation coincides with ideal for a 1x1 F-block.
  MgrStrategy strat_j = strat;
  strat_j.levels[0].interp = InterpKind::jacobi;
  MgrHierarchy Hj = mgr_setup(A, part, strat_j);
  Vec zj = mgr_apply(Hj, v);
  CHECK((zj - z).norm() <= 1e-15);
}

TEST_CASE("exactness: ideal interp + injection + exact solves invert A") {
  std::mt19937 rng(47);
  for (Index n : {20, 97, 200}) {
    SpMat A = random_nonsingular(rng, n);
    std::vector<std::string> names(n);
    for (Index i = 0; i < n; ++i) names[i] = (rng() % 2 == 0) ? "f" : "c";
    names[0] = "f";
    names[1] = "c";  // both fields present
    DofPartition part = DofPartition::from_names({"f", "c"}, names);

    MgrStrategy strat;
    MgrLevelSpec lvl;
    lvl.f_fields = {"f"};
    lvl.interp = InterpKind::ideal;
    lvl.restrict_kind = RestrictKind::injection;
    lvl.f_relax = exact_ff_relax();
    strat.levels.push_back(lvl);
    strat.coarse.kind = CoarseSolverSpec::Kind::dense_lu;
    MgrHierarchy H = mgr_setup(A, part, strat);

    Vec b = random_vec(rng, n);
    Vec x = Vec::Zero(n);
    KrylovConfig cfg;
    cfg.rel_tol = 1e-12;
    SolveReport rep = gmres(A, b, x, cfg, mgr_preconditioner(H));
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK((b - A * x).norm() <= 1e-12 * b.norm());
  }
}

TEST_CASE("mgr_apply is linear") {
  std::mt19937 rng(53);
  SpMat A = random_nonsingular(rng, 24);
  std::vector<std::string> names;
  for (Index i = 0; i < 24; ++i) names.push_back(i % 3 == 0 ? "f" : "c");
  DofPartition part = DofPartition::from_names({"f", "c"}, names);
  MgrStrategy strat;
  MgrLevelSpec lvl;
  lvl.f_fields = {"f"};
  lvl.interp = InterpKind::jacobi;
  lvl.restrict_kind = RestrictKind::jacobi;
  lvl.f_relax = jacobi_relax(2);
  strat.levels.push_back(lvl);
  strat.coarse.kind = CoarseSolverSpec::Kind::dense_lu;
  MgrHierarchy H = mgr_setup(A, part, strat);

  Vec r1 = random_vec(rng, 24), r2 = random_vec(rng, 24);
  Vec lhs = mgr_apply(H, Vec(0.5 * r1 + 3.0 * r2));
  Vec rhs = 0.5 * mgr_apply(H, r1) + 3.0 * mgr_apply(H, r2);
  CHECK((lhs - rhs).norm() <= 1e-12 * (rhs.norm() + 1.0));
}

TEST_CASE("permutation equivariance of iteration counts") {
  std::mt19937 rng(61);
  const Index n = 60;
  SpMat A = random_sdd(rng, n, 4);
  std::vector<std::string> names;
  for (Index i = 0; i < n; ++i) names.push_back(i % 2 == 0 ? "f" : "c");
  DofPartition part = DofPartition::from_names({"f", "c"}, names);

  MgrStrategy strat;
  MgrLevelSpec lvl;
  lvl.f_fields = {"f"};
  lvl.interp = InterpKind::jacobi;
  lvl.restrict_kind = RestrictKind::injection;
  lvl.f_relax = jacobi_relax();
  strat.levels.push_back(lvl);
  strat.coarse.kind = CoarseSolverSpec::Kind::dense_lu;

  std::mt19937 rng_b(62);
  Vec b = random_vec(rng_b, n);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-9;
  cfg.max_iters = 400;

  MgrHierarchy H = mgr_setup(A, part, strat);
  Vec x = Vec::Zero(n);
  SolveReport rep = gmres(A, b, x, cfg, mgr_preconditioner(H));
  REQUIRE(rep.converged);

  // Apply a random permutation to rows/cols/labels/rhs.
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i)
    for (SpMat::InnerIterator it(A, i); it; ++it)
      t.push_back({perm[i], perm[it.col()], it.value()});
  SpMat Ap = from_triplets(n, n, t);
  std::vector<std::string> names_p(n);
  Vec bp(n);
  for (Index i = 0; i < n; ++i) {
    names_p[perm[i]] = names[i];
    bp[perm[i]] = b[i];
  }
  DofPartition part_p = DofPartition::from_names({"f", "c"}, names_p);
  MgrHierarchy Hp = mgr_setup(Ap, part_p, strat);
  Vec xp = Vec::Zero(n);
  SolveReport rep_p = gmres(Ap, bp, xp, cfg, mgr_preconditioner(Hp));
  REQUIRE(rep_p.converged);
  CHECK(rep.iterations == rep_p.iterations);

  // The solutions agree after undoing the permutation.
  Vec x_unperm(n);
  for (Index i = 0; i < n; ++i) x_unperm[i] = xp[perm[i]];
  CHECK((x_unperm - x).norm() <= 1e-7 * x.norm());
}

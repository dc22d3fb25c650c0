#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mgrkit/krylov.hpp"
#include "mgrkit/sparse.hpp"
#include "test_util.hpp"

using namespace mgrkit;
using namespace testutil;

TEST_CASE("identity converges in one iteration") {
  std::mt19937 rng(2);
  SpMat I = sparse_identity(8);
  Vec b = random_vec(rng, 8);
  Vec x = Vec::Zero(8);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-12;
  SolveReport rep = gmres(I, b, x, cfg);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK((x - b).norm() <= 1e-12 * b.norm());
}

TEST_CASE("exact-inverse preconditioner gives one-iteration convergence") {
  {
    std::vector<Triplet> t;
    for (Index i = 0; i < 10; ++i) t.push_back({i, i, static_cast<Real>(i + 1)});
    SpMat A = from_triplets(10, 10, t);
    Vec b = Vec::Ones(10);
    Vec x = Vec::Zero(10);
    KrylovConfig cfg;
    cfg.rel_tol = 1e-12;
    const LinOp minv = [&](const Vec& v) -> Vec {
      Vec out(v.size());
      for (Index i = 0; i < v.size(); ++i) out[i] = v[i] / static_cast<Real>(i + 1);
      return out;
    };
    SolveReport rep = gmres(A, b, x, cfg, minv);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK((A * x - b).norm() <= 1e-12 * b.norm());
  }

  // Any nonsingular A up to n = 200.
  std::mt19937 rng(77);
  for (Index n : {37, 120, 200}) {
    SpMat A = random_nonsingular(rng, n);
    DenseLU lu = factor_dense(A);
    Vec b = random_vec(rng, n);
    Vec x = Vec::Zero(n);
    KrylovConfig cfg;
    cfg.rel_tol = 1e-12;
    const LinOp minv = [&lu](const Vec& v) -> Vec { return lu.solve(v); };
    SolveReport rep = gmres(A, b, x, cfg, minv);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK((A * x - b).norm() <= 1e-12 * b.norm());
  }
}

TEST_CASE("1D Laplacian matches a dense LU solve") {
  const Index n = 100;
  SpMat A = tridiag(n, -1.0, 2.0, -1.0);
  std::mt19937 rng(4);
  Vec b = random_vec(rng, n);
  Vec x = Vec::Zero(n);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.max_iters = 2000;
  SolveReport rep = gmres(A, b, x, cfg);
  CHECK(rep.converged);
  Vec xd = factor_dense(A).solve(b);
  CHECK((x - xd).norm() <= 1e-6 * xd.norm());
}

TEST_CASE("iteration count is invariant under rhs scaling") {
  SpMat A = laplace2d(12, 12);
  std::mt19937 rng(8);
  Vec b = random_vec(rng, A.rows());
  KrylovConfig cfg;
  cfg.rel_tol = 1e-9;
  cfg.max_iters = 1000;

  std::vector<Index> iters;
  std::vector<Vec> sols;
  for (Real alpha : {1e-6, 1.0, 1e6}) {
    Vec x = Vec::Zero(A.rows());
    SolveReport rep = gmres(A, Vec(alpha * b), x, cfg);
    CHECK(rep.converged);
    iters.push_back(rep.iterations);
    sols.push_back(x / alpha);
  }
  CHECK(iters[0] == iters[1]);
  CHECK(iters[1] == iters[2]);
  CHECK((sols[0] - sols[1]).norm() <= 1e-9 * sols[1].norm());
  CHECK((sols[2] - sols[1]).norm() <= 1e-9 * sols[1].norm());
}

TEST_CASE("restarted and full runs agree at tolerance") {
  SpMat A = tridiag(50, -1.0, 2.0, -1.0);
  std::mt19937 rng(12);
  Vec b = random_vec(rng, 50);

  Vec x5 = Vec::Zero(50), xf = Vec::Zero(50);
  KrylovConfig short_cfg;
  short_cfg.restart = 5;
  short_cfg.rel_tol = 1e-10;
  short_cfg.max_iters = 5000;
  KrylovConfig full_cfg;
  full_cfg.restart = 100;
  full_cfg.rel_tol = 1e-10;
  full_cfg.max_iters = 5000;
  SolveReport r5 = gmres(A, b, x5, short_cfg);
  SolveReport rf = gmres(A, b, xf, full_cfg);
  CHECK(r5.converged);
  CHECK(rf.converged);
  CHECK((x5 - xf).norm() <= 1e-6 * xf.norm());
}

TEST_CASE("zero rhs returns zero immediately") {
  SpMat A = tridiag(6, -1.0, 2.0, -1.0);
  Vec x = Vec::Ones(6);
  KrylovConfig cfg;
  SolveReport rep = gmres(A, Vec::Zero(6), x, cfg);
  CHECK(rep.converged);
  CHECK(rep.iterations == 0);
  CHECK(x.norm() == 0.0);
}

TEST_CASE("breakdown without convergence is an error") {
  // b lies exactly in the null space of A: the first Arnoldi vector is
  // annihilated outright while the residual stays at ||b||.
  SpMat A = from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 1.0}});
  Vec b = Vec::Zero(3);
  b[2] = 1.0;
  Vec x = Vec::Zero(3);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-10;
  CHECK_THROWS(gmres(A, b, x, cfg));
}

TEST_CASE("breakdown with tolerance met reports convergence") {
  // b in the range of the singular A: the space exhausts exactly at the
  // solution.
  SpMat A = from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 1.0}});
  Vec b = Vec::Zero(3);
  b[0] = 1.0;
  b[1] = 1.0;
  Vec x = Vec::Zero(3);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-12;
  SolveReport rep = gmres(A, b, x, cfg);
  CHECK(rep.converged);
  CHECK((A * x - b).norm() <= 1e-12 * b.norm());
}

TEST_CASE("non-finite input is an error") {
  SpMat A = sparse_identity(3);
  Vec b = Vec::Ones(3);
  b[1] = std::numeric_limits<Real>::quiet_NaN();
  Vec x = Vec::Zero(3);
  KrylovConfig cfg;
  CHECK_THROWS(gmres(A, b, x, cfg));
}

TEST_CASE("matrix-free operator path") {
  const Index n = 16;
  const LinOp op = [](const Vec& v) -> Vec { return 2.0 * v; };
  Vec b = Vec::Constant(n, 3.0);
  Vec x = Vec::Zero(n);
  KrylovConfig cfg;
  cfg.rel_tol = 1e-13;
  SolveReport rep = gmres_op(op, n, b, x, cfg);
  CHECK(rep.converged);
  CHECK((x - Vec::Constant(n, 1.5)).norm() <= 1e-12);
}

TEST_CASE("residual history tracks the true residual at convergence") {
  SpMat A = laplace2d(8, 8);
  std::mt19937 rng(31);
  Vec b = random_vec(rng, A.rows());
  Vec x = Vec::Zero(A.rows());
  KrylovConfig cfg;
  cfg.rel_tol = 1e-9;
  SolveReport rep = gmres(A, b, x, cfg);
  REQUIRE(rep.converged);
  REQUIRE(!rep.residual_history.empty());
  const Real truth = (b - A * x).norm() / b.norm();
  CHECK(rep.final_residual == doctest::Approx(truth).epsilon(1e-10));
  CHECK(rep.final_residual <= cfg.rel_tol);
}

#include "mgrkit/relax.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mgrkit/amg.hpp"

namespace mgrkit {
namespace {

Partition normalize_partition(const Partition& partition, Index n) {
  if (partition.empty()) return {{0, n}};
  Index expect = 0;
  for (const auto& [begin, end] : partition) {
    if (begin != expect || end <= begin)
      throw std::invalid_argument("smoother partition ranges must tile [0,n) in order");
    expect = end;
  }
  if (expect != n) throw std::invalid_argument("smoother partition does not cover the matrix");
  return partition;
}

/// Range id per row, for O(1) "outside own range" tests.
std::vector<Index> range_of_row(const Partition& partition, Index n) {
  std::vector<Index> owner(n);
  for (Index k = 0; k < static_cast<Index>(partition.size()); ++k)
    for (Index i = partition[k].first; i < partition[k].second; ++i) owner[i] = k;
  return owner;
}

}  // namespace

Vec l1_diagonal(const SpMat& A, const Partition& partition) {
  const Index n = A.rows();
  const Partition ranges = normalize_partition(partition, n);
  const std::vector<Index> owner = range_of_row(ranges, n);
  Vec d = Vec::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (SpMat::InnerIterator it(A, i); it; ++it) {
      if (it.col() == i)
        d[i] += it.value();
      else if (owner[it.col()] != owner[i])
        d[i] += std::abs(it.value());
    }
  }
  return d;
}

void jacobi_sweep(const SpMat& A, const Vec& b, Vec& x, Real weight) {
  const Vec dinv = diag_inverse(A);
  x += weight * dinv.cwiseProduct(b - A * x);
}

void hybrid_l1_gs_sweep(const SpMat& A, const Vec& l1d, const Vec& b, Vec& x, bool forward,
                        const Partition& partition) {
  const Index n = A.rows();
  if (b.size() != n || x.size() != n || l1d.size() != n)
    throw std::invalid_argument("hybrid_l1_gs_sweep: size mismatch");
  const Partition ranges = normalize_partition(partition, n);
  const std::vector<Index> owner = range_of_row(ranges, n);
  const Vec snapshot = x;
  for (Index i = 0; i < n; ++i)
    if (l1d[i] == 0.0)
      throw std::runtime_error("hybrid_l1_gs_sweep: zero L1 diagonal at row " + std::to_string(i));

  for (const auto& [begin, end] : ranges) {
    for (Index step = 0; step < end - begin; ++step) {
      const Index i = forward ? begin + step : end - 1 - step;
      Real s = b[i];
      for (SpMat::InnerIterator it(A, i); it; ++it) {
        const Real xv = (owner[it.col()] == owner[i]) ? x[it.col()] : snapshot[it.col()];
        s -= it.value() * xv;
      }
      x[i] += s / l1d[i];
    }
  }
}

void hybrid_l1_gs_sweep(const SpMat& A, const Vec& b, Vec& x, bool forward,
                        const Partition& partition) {
  hybrid_l1_gs_sweep(A, l1_diagonal(A, partition), b, x, forward, partition);
}

Vec block_jacobi_exact_apply(const SpMat& A, const BlockLayout& layout, const Vec& r) {
  BlockDiagonalLU lu(A, layout);
  return lu.solve(r);
}

BoundSmoother BoundSmoother::bind(const SmootherSpec& spec, const SpMat& A,
                                  const std::vector<int>* unknown_map) {
  if (A.rows() != A.cols()) throw std::invalid_argument("smoother: matrix must be square");
  if (spec.sweeps < 1) throw std::invalid_argument("smoother: sweeps must be >= 1");
  if (!(spec.weight > 0.0 && spec.weight < 2.0))
    throw std::invalid_argument("smoother: weight must lie in (0, 2)");

  BoundSmoother s;
  s.spec_ = spec;
  s.A_ = std::make_shared<const SpMat>(A);
  const Index n = A.rows();

  switch (spec.kind) {
    case SmootherKind::jacobi:
      s.dinv_ = diag_inverse(A);
      break;
    case SmootherKind::l1_jacobi: {
      Partition singles;
      singles.reserve(n);
      for (Index i = 0; i < n; ++i) singles.push_back({i, i + 1});
      Vec d = l1_diagonal(A, singles);
      s.dinv_.resize(n);
      for (Index i = 0; i < n; ++i) {
        if (d[i] == 0.0)
          throw std::runtime_error("smoother: zero L1 diagonal at row " + std::to_string(i));
        s.dinv_[i] = 1.0 / d[i];
      }
      break;
    }
    case SmootherKind::hybrid_l1_gs_forward:
    case SmootherKind::hybrid_l1_gs_backward:
      s.partition_ = normalize_partition(spec.partition, n);
      s.l1d_ = l1_diagonal(A, s.partition_);
      for (Index i = 0; i < n; ++i)
        if (s.l1d_[i] == 0.0)
          throw std::runtime_error("smoother: zero L1 diagonal at row " + std::to_string(i));
      break;
    case SmootherKind::block_jacobi_exact: {
      if (spec.block_sizes.empty())
        throw std::invalid_argument("smoother: block_jacobi_exact requires block sizes");
      s.block_lu_ =
          std::make_shared<BlockDiagonalLU>(A, BlockLayout::from_sizes(spec.block_sizes));
      break;
    }
    case SmootherKind::dense_lu:
      s.dense_lu_ = std::make_shared<DenseLU>(factor_dense(A));
      break;
    case SmootherKind::amg_vcycle: {
      AmgConfig cfg = spec.amg ? *spec.amg : AmgConfig{};
      if (spec.use_unknown_map) {
        if (unknown_map == nullptr)
          throw std::invalid_argument("smoother: use_unknown_map set but no unknown map supplied");
        cfg.unknown_map = *unknown_map;
      }
      s.amg_ = std::make_shared<AmgHierarchy>(amg_setup(A, cfg));
      break;
    }
  }
  return s;
}

Vec BoundSmoother::apply(const Vec& r) const {
  if (!A_) throw std::logic_error("smoother: apply before bind");
  const SpMat& A = *A_;
  if (r.size() != A.rows()) throw std::invalid_argument("smoother: residual size mismatch");

  switch (spec_.kind) {
    case SmootherKind::dense_lu:
      return dense_lu_->solve(r);
    case SmootherKind::block_jacobi_exact:
      return block_lu_->solve(r);
    default:
      break;
  }

  Vec z = Vec::Zero(r.size());
  for (Index sweep = 0; sweep < spec_.sweeps; ++sweep) {
    switch (spec_.kind) {
      case SmootherKind::jacobi:
      case SmootherKind::l1_jacobi:
        if (sweep == 0)
          z = spec_.weight * dinv_.cwiseProduct(r);
        else
          z += spec_.weight * dinv_.cwiseProduct(r - A * z);
        break;
      case SmootherKind::hybrid_l1_gs_forward:
        hybrid_l1_gs_sweep(A, l1d_, r, z, true, partition_);
        break;
      case SmootherKind::hybrid_l1_gs_backward:
        hybrid_l1_gs_sweep(A, l1d_, r, z, false, partition_);
        break;
      case SmootherKind::amg_vcycle:
        if (sweep == 0)
          z = amg_vcycle(*amg_, r);
        else
          z += amg_vcycle(*amg_, r - A * z);
        break;
      default:
        break;
    }
  }
  return z;
}

}  // namespace mgrkit

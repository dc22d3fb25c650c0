#include "mgrkit/problems/comp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <utility>

namespace mgrkit::comp {

namespace {

Index cell_id(const CompConfig& cfg, Index i, Index j, Index k) {
  return i + cfg.nx * (j + cfg.ny * k);
}

/// Standard normal via Box-Muller so the stream is identical across library
/// implementations.
class NormalDraw {
 public:
  explicit NormalDraw(unsigned seed) : rng_(seed) {}
  Real operator()() {
    const Real u1 = (static_cast<Real>(rng_()) + 0.5) * 0x1.0p-32;
    const Real u2 = (static_cast<Real>(rng_()) + 0.5) * 0x1.0p-32;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937 rng_;
};

void validate(const CompConfig& cfg) {
  if (cfg.nx < 2 || cfg.ny < 2 || cfg.nz < 2)
    throw std::invalid_argument("comp: grid dims must be at least 2 each");
  if (cfg.dt <= 0.0) throw std::invalid_argument("comp: dt must be positive");
  if (cfg.volume_rho2 == 0.0)
    throw std::invalid_argument("comp: volume-constraint self diagonal must be nonzero");
  if (cfg.wells < 0) throw std::invalid_argument("comp: negative well count");
  if (cfg.wells > 0) {
    if (cfg.segments < 2) throw std::invalid_argument("comp: wells need at least 2 segments");
    if (cfg.perforations < 1 || cfg.perforations > cfg.segments - 1)
      throw std::invalid_argument("comp: perforations must fit on segments 1..segments-1");
    if (cfg.perforations > cfg.nz)
      throw std::out_of_range("comp: perforation cell index out of grid");
  }
}

/// Wells sit on the diagonal of the areal grid, one column of perforated
/// cells each, top perforation at the shallowest layer.
std::pair<Index, Index> well_column(const CompConfig& cfg, Index w) {
  const Index ix = static_cast<Index>((w + 1) * cfg.nx / (cfg.wells + 1));
  const Index iy = static_cast<Index>((w + 1) * cfg.ny / (cfg.wells + 1));
  return {std::min(ix, cfg.nx - 1), std::min(iy, cfg.ny - 1)};
}

}  // namespace

CompSystem build_comp_system(const CompConfig& cfg) {
  validate(cfg);
  const Index N = cfg.nx * cfg.ny * cfg.nz;
  const Index seg_dofs = 4 * cfg.segments;
  const Index W = cfg.wells * seg_dofs;
  const Index n = 3 * N + W;

  const Index op = 0, orho1 = N, orho2 = 2 * N, ow = 3 * N;
  const auto pw = [&](Index w, Index s) { return ow + w * seg_dofs + 4 * s + 0; };
  const auto r1w = [&](Index w, Index s) { return ow + w * seg_dofs + 4 * s + 1; };
  const auto r2w = [&](Index w, Index s) { return ow + w * seg_dofs + 4 * s + 2; };
  const auto sw = [&](Index w, Index s) { return ow + w * seg_dofs + 4 * s + 3; };

  NormalDraw draw(cfg.seed);
  Vec K = Vec::Ones(N);
  if (cfg.perm == PermKind::lognormal)
    for (Index c = 0; c < N; ++c) K[c] = std::exp(cfg.perm_sigma * draw());

  // Pressure block: 7-point two-point-flux operator on a unit grid with
  // harmonically combined cell permeabilities, plus the storage diagonal.
  std::vector<Triplet> pp;
  Vec p_diag = Vec::Constant(N, cfg.accumulation);
  struct Face { Index a, b; Real T; };
  std::vector<Face> faces;
  for (Index k = 0; k < cfg.nz; ++k)
    for (Index j = 0; j < cfg.ny; ++j)
      for (Index i = 0; i < cfg.nx; ++i) {
        const Index c = cell_id(cfg, i, j, k);
        const Index nb[3] = {i + 1 < cfg.nx ? cell_id(cfg, i + 1, j, k) : -1,
                             j + 1 < cfg.ny ? cell_id(cfg, i, j + 1, k) : -1,
                             k + 1 < cfg.nz ? cell_id(cfg, i, j, k + 1) : -1};
        for (Index d : nb) {
          if (d < 0) continue;
          const Real T = 2.0 * K[c] * K[d] / (K[c] + K[d]);
          faces.push_back({c, d, T});
          p_diag[c] += T;
          p_diag[d] += T;
          pp.emplace_back(op + c, op + d, -T);
          pp.emplace_back(op + d, op + c, -T);
        }
      }
  for (Index c = 0; c < N; ++c) pp.emplace_back(op + c, op + c, p_diag[c]);

  // Driving pressure field for the advection upwinding: unit injection at
  // each well's top perforated cell (grid center when there are no wells).
  // The pressure offset is zero, so the triplets double as the N-by-N block.
  Vec q = Vec::Zero(N);
  if (cfg.wells == 0) {
    q[cell_id(cfg, cfg.nx / 2, cfg.ny / 2, cfg.nz / 2)] = 1.0;
  } else {
    for (Index w = 0; w < cfg.wells; ++w) {
      const auto [ix, iy] = well_column(cfg, w);
      q[cell_id(cfg, ix, iy, 0)] = 1.0;
    }
  }
  const Vec head = direct_solve(from_triplets(N, N, pp), q);

  // Density-1 block: mass diagonal plus first-order upwind advection on the
  // face fluxes, rescaled so the strongest row meets the requested ratio.
  const Real mass = 1.0 / cfg.dt;
  Vec adv_diag = Vec::Zero(N);
  std::vector<Triplet> adv;
  for (const Face& f : faces) {
    const Real flux = f.T * (head[f.a] - head[f.b]);
    const Index up = flux >= 0.0 ? f.a : f.b;
    const Index down = flux >= 0.0 ? f.b : f.a;
    adv_diag[up] += std::abs(flux);
    adv.emplace_back(orho1 + down, orho1 + up, -std::abs(flux));
  }
  Vec row_off = Vec::Zero(N);
  for (const Triplet& t : adv) row_off[t.row() - orho1] += std::abs(t.value());
  const Real peak = row_off.maxCoeff();
  const Real scale = peak > 0.0 ? cfg.advection_ratio * mass / peak : 0.0;

  std::vector<Triplet> trip;
  for (const Triplet& t : adv) trip.emplace_back(t.row(), t.col(), scale * t.value());
  for (Index c = 0; c < N; ++c)
    trip.emplace_back(orho1 + c, orho1 + c, mass + scale * adv_diag[c]);

  for (const Triplet& t : pp) trip.push_back(t);

  // Cross couplings between pressure and densities, all diagonal.
  for (Index c = 0; c < N; ++c) {
    trip.emplace_back(op + c, orho1 + c, cfg.coupling * cfg.accumulation);
    trip.emplace_back(op + c, orho2 + c, 0.5 * cfg.coupling * cfg.accumulation);
    trip.emplace_back(orho1 + c, op + c, -cfg.coupling * mass);
    trip.emplace_back(orho1 + c, orho2 + c, 0.5 * cfg.coupling * mass);
  }

  // Volume-constraint rows: strictly diagonal by construction, nothing else
  // may land on them.
  for (Index c = 0; c < N; ++c) {
    if (cfg.volume_p != 0.0) trip.emplace_back(orho2 + c, op + c, cfg.volume_p);
    if (cfg.volume_rho1 != 0.0) trip.emplace_back(orho2 + c, orho1 + c, cfg.volume_rho1);
    trip.emplace_back(orho2 + c, orho2 + c, cfg.volume_rho2);
  }

  // Well blocks: segment-chain rows for pressure, densities and rate, one
  // control row per well in place of a top-segment equation.
  std::vector<Index> control_rows;
  const Real gamma = 0.5 * cfg.accumulation;
  for (Index w = 0; w < cfg.wells; ++w) {
    const Index S = cfg.segments;
    for (Index s = 0; s < S; ++s) {
      const bool p_is_control = cfg.control == ControlKind::rate && s == 0;
      const bool s_is_control = cfg.control == ControlKind::pressure && s == 0;
      if (p_is_control) {
        trip.emplace_back(pw(w, s), pw(w, s), 0.0);  // stored zero diagonal
        trip.emplace_back(pw(w, s), sw(w, 0), 1.0);
        trip.emplace_back(pw(w, s), sw(w, 1), 0.25);
        control_rows.push_back(pw(w, s));
      } else {
        trip.emplace_back(pw(w, s), pw(w, s), 4.0);
        if (s > 0) trip.emplace_back(pw(w, s), pw(w, s - 1), -1.0);
        if (s + 1 < S) trip.emplace_back(pw(w, s), pw(w, s + 1), -1.0);
        trip.emplace_back(pw(w, s), sw(w, s), 1.0);
        if (s > 0) trip.emplace_back(pw(w, s), sw(w, s - 1), -1.0);
      }
      trip.emplace_back(r1w(w, s), r1w(w, s), 3.0);
      if (s > 0) trip.emplace_back(r1w(w, s), r1w(w, s - 1), -0.75);
      if (s + 1 < S) trip.emplace_back(r1w(w, s), r1w(w, s + 1), -0.75);
      trip.emplace_back(r1w(w, s), pw(w, s), 0.3);
      trip.emplace_back(r2w(w, s), r2w(w, s), 3.0);
      if (s > 0) trip.emplace_back(r2w(w, s), r2w(w, s - 1), -0.75);
      if (s + 1 < S) trip.emplace_back(r2w(w, s), r2w(w, s + 1), -0.75);
      trip.emplace_back(r2w(w, s), pw(w, s), 0.3);
      if (s_is_control) {
        trip.emplace_back(sw(w, s), sw(w, s), 0.0);
        trip.emplace_back(sw(w, s), pw(w, 0), 1.0);
        trip.emplace_back(sw(w, s), pw(w, 1), 0.25);
        control_rows.push_back(sw(w, s));
      } else {
        trip.emplace_back(sw(w, s), sw(w, s), 2.0);
        if (s > 0) trip.emplace_back(sw(w, s), sw(w, s - 1), -0.4);
        if (s + 1 < S) trip.emplace_back(sw(w, s), sw(w, s + 1), -0.4);
        trip.emplace_back(sw(w, s), pw(w, s), 1.0);
        if (s + 1 < S) trip.emplace_back(sw(w, s), pw(w, s + 1), -1.0);
      }
    }
    // Perforations tie reservoir cells to interior segments; the control row
    // is never touched.
    const auto [ix, iy] = well_column(cfg, w);
    for (Index k = 0; k < cfg.perforations; ++k) {
      const Index c = cell_id(cfg, ix, iy, k);
      const Index s = k + 1;
      trip.emplace_back(op + c, pw(w, s), -gamma);
      trip.emplace_back(pw(w, s), op + c, -gamma);
      trip.emplace_back(op + c, op + c, gamma);
      trip.emplace_back(pw(w, s), pw(w, s), gamma);
      trip.emplace_back(orho1 + c, r1w(w, s), -0.1 * gamma);
      trip.emplace_back(r1w(w, s), orho1 + c, -0.1 * gamma);
      trip.emplace_back(orho1 + c, orho1 + c, 0.1 * gamma);
      trip.emplace_back(r1w(w, s), r1w(w, s), 0.1 * gamma);
    }
  }

  CompSystem sys;
  sys.A = from_triplets(n, n, trip);
  sys.n_cells = N;
  sys.well_dofs = W;
  sys.control_rows = std::move(control_rows);
  sys.well_rows.reserve(W);
  for (Index d = ow; d < n; ++d) sys.well_rows.push_back(d);

  std::vector<std::string> names(n);
  for (Index c = 0; c < N; ++c) {
    names[op + c] = "p";
    names[orho1 + c] = "rho1";
    names[orho2 + c] = "rho2";
  }
  for (Index d = ow; d < n; ++d) names[d] = "well";
  std::vector<std::string> order = {"p", "rho1", "rho2"};
  if (cfg.wells > 0) order.push_back("well");
  sys.partition = DofPartition::from_names(std::move(order), names);
  return sys;
}

MgrStrategy strategy_compositional(bool has_wells) {
  MgrStrategy s;
  s.name = "compositional";
  const auto level = [](const char* field) {
    MgrLevelSpec lvl;
    lvl.f_fields = {field};
    lvl.interp = InterpKind::jacobi;
    lvl.restrict_kind = RestrictKind::injection;
    lvl.f_relax.kind = SmootherKind::jacobi;
    lvl.f_relax.sweeps = 1;
    return lvl;
  };
  s.levels.push_back(level("rho2"));
  s.levels.push_back(level("rho1"));
  if (has_wells) {
    MgrLevelSpec lvl = level("p");
    lvl.f_relax.kind = SmootherKind::amg_vcycle;
    lvl.f_relax.sweeps = 1;
    s.levels.push_back(lvl);
    s.coarse.kind = CoarseSolverSpec::Kind::dense_lu;
  } else {
    s.coarse.kind = CoarseSolverSpec::Kind::amg_vcycle;
    s.coarse.amg_cycles = 1;
  }
  return s;
}

ProblemBundle generate_bundle(const CompConfig& cfg) {
  CompSystem sys = build_comp_system(cfg);

  // Seeded load vector, independent of the permeability stream.
  NormalDraw draw(cfg.seed + 0x9e3779b9u);
  Vec rhs(sys.A.rows());
  for (Index i = 0; i < rhs.size(); ++i) rhs[i] = draw();

  ProblemBundle b;
  b.matrix = std::move(sys.A);
  b.rhs = std::move(rhs);
  b.partition = std::move(sys.partition);
  b.well_rows = std::move(sys.well_rows);
  b.problem = "comp";

  char buf[640];
  std::snprintf(buf, sizeof buf,
                "{\"dims\":[%d,%d,%d],\"dt\":%g,\"perm\":\"%s\",\"perm_sigma\":%g,"
                "\"seed\":%u,\"accumulation\":%g,\"advection_ratio\":%g,\"coupling\":%g,"
                "\"volume\":[%g,%g,%g],\"wells\":%d,\"segments\":%d,\"perforations\":%d,"
                "\"control\":\"%s\",\"cells\":%d,\"well_dofs\":%d}",
                cfg.nx, cfg.ny, cfg.nz, cfg.dt,
                cfg.perm == PermKind::lognormal ? "lognormal" : "uniform", cfg.perm_sigma,
                cfg.seed, cfg.accumulation, cfg.advection_ratio, cfg.coupling, cfg.volume_p,
                cfg.volume_rho1, cfg.volume_rho2, cfg.wells, cfg.segments, cfg.perforations,
                cfg.control == ControlKind::rate ? "rate" : "pressure", sys.n_cells,
                sys.well_dofs);
  b.params_json = buf;
  return b;
}

}  // namespace mgrkit::comp

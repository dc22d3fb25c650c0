/// Command-line driver: generate problem bundles, solve them with reduction
/// strategies, run refinement studies, and verify the solver invariants.
///
/// Exit codes: 0 success, 1 solver non-convergence, 2 usage or config error,
/// 3 internal error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgrkit/bundle.hpp"
#include "mgrkit/krylov.hpp"
#include "mgrkit/matrix_market.hpp"
#include "mgrkit/mgr.hpp"
#include "mgrkit/problems/comp.hpp"
#include "mgrkit/problems/frac.hpp"
#include "mgrkit/problems/mfd.hpp"
#include "mgrkit/strategy_json.hpp"
#include "mgrkit/verify.hpp"

namespace {

using nlohmann::json;
using namespace mgrkit;

constexpr int kOk = 0, kNoConverge = 1, kUsage = 2, kInternal = 3;

/// Config or command-line problem the user can fix; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

double num(const json& v, const std::string& key) {
  if (!v.is_number()) throw UsageError("config field '" + key + "' must be a number");
  return v.get<double>();
}

Index integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw UsageError("config field '" + key + "' must be an integer");
  return v.get<Index>();
}

std::string str(const json& v, const std::string& key) {
  if (!v.is_string()) throw UsageError("config field '" + key + "' must be a string");
  return v.get<std::string>();
}

mfd::MfdConfig mfd_config(const json& j) {
  mfd::MfdConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "nx") c.nx = integer(v, k);
    else if (k == "ny") c.ny = integer(v, k);
    else if (k == "nz") c.nz = integer(v, k);
    else if (k == "perturbation") c.perturbation = num(v, k);
    else if (k == "seed") c.seed = static_cast<unsigned>(integer(v, k));
    else if (k == "inner_product") {
      const std::string s = str(v, k);
      if (s == "tpfa") c.inner = mfd::InnerProduct::tpfa;
      else if (s == "consistent") c.inner = mfd::InnerProduct::consistent;
      else throw UsageError("config field 'inner_product' must be tpfa or consistent");
    } else if (k == "kappa") c.kappa = num(v, k);
    else if (k == "dt") c.dt = num(v, k);
    else if (k == "time_steps") c.time_steps = integer(v, k);
    else if (k == "p_init") c.p_init = num(v, k);
    else if (k == "p_inlet") c.p_inlet = num(v, k);
    else if (k == "p_outlet") c.p_outlet = num(v, k);
    else if (k == "gravity_on") {
      if (!v.is_boolean()) throw UsageError("config field 'gravity_on' must be a boolean");
      c.gravity_on = v.get<bool>();
    } else throw UsageError("unknown config field '" + k + "' for problem 'mfd'");
  }
  return c;
}

comp::CompConfig comp_config(const json& j) {
  comp::CompConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "nx") c.nx = integer(v, k);
    else if (k == "ny") c.ny = integer(v, k);
    else if (k == "nz") c.nz = integer(v, k);
    else if (k == "dt") c.dt = num(v, k);
    else if (k == "perm") {
      const std::string s = str(v, k);
      if (s == "uniform") c.perm = comp::PermKind::uniform;
      else if (s == "lognormal") c.perm = comp::PermKind::lognormal;
      else throw UsageError("config field 'perm' must be uniform or lognormal");
    } else if (k == "perm_sigma") c.perm_sigma = num(v, k);
    else if (k == "seed") c.seed = static_cast<unsigned>(integer(v, k));
    else if (k == "accumulation") c.accumulation = num(v, k);
    else if (k == "advection_ratio") c.advection_ratio = num(v, k);
    else if (k == "coupling") c.coupling = num(v, k);
    else if (k == "volume_p") c.volume_p = num(v, k);
    else if (k == "volume_rho1") c.volume_rho1 = num(v, k);
    else if (k == "volume_rho2") c.volume_rho2 = num(v, k);
    else if (k == "wells") c.wells = integer(v, k);
    else if (k == "segments") c.segments = integer(v, k);
    else if (k == "perforations") c.perforations = integer(v, k);
    else if (k == "control") {
      const std::string s = str(v, k);
      if (s == "rate") c.control = comp::ControlKind::rate;
      else if (s == "pressure") c.control = comp::ControlKind::pressure;
      else throw UsageError("config field 'control' must be rate or pressure");
    } else throw UsageError("unknown config field '" + k + "' for problem 'comp'");
  }
  return c;
}

frac::FracConfig frac_config(const json& j) {
  frac::FracConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "domain") c.domain = num(v, k);
    else if (k == "nx") c.nx = integer(v, k);
    else if (k == "ny") c.ny = integer(v, k);
    else if (k == "young") c.young = num(v, k);
    else if (k == "poisson") c.poisson = num(v, k);
    else if (k == "viscosity") c.viscosity = num(v, k);
    else if (k == "bulk_fluid") c.bulk_fluid = num(v, k);
    else if (k == "half_length") c.half_length = num(v, k);
    else if (k == "aperture0") c.aperture0 = num(v, k);
    else if (k == "dt") c.dt = num(v, k);
    else if (k == "rho_fluid") c.rho_fluid = num(v, k);
    else if (k == "gravity") c.gravity = num(v, k);
    else if (k == "source_cell") c.source_cell = integer(v, k);
    else if (k == "source_rate") c.source_rate = num(v, k);
    else throw UsageError("unknown config field '" + k + "' for problem 'frac'");
  }
  return c;
}

/// size < 0 means "keep the config dims"; seed < 0 means "keep the config seed".
ProblemBundle make_bundle(const std::string& problem, const json& cfg, long long seed,
                          Index size) {
  if (problem == "mfd") {
    mfd::MfdConfig c = mfd_config(cfg);
    if (seed >= 0) c.seed = static_cast<unsigned>(seed);
    if (size > 0) c.nx = c.ny = c.nz = size;
    return mfd::generate_bundle(c);
  }
  if (problem == "comp") {
    comp::CompConfig c = comp_config(cfg);
    if (seed >= 0) c.seed = static_cast<unsigned>(seed);
    if (size > 0) c.nx = c.ny = c.nz = size;
    return comp::generate_bundle(c);
  }
  if (problem == "frac") {
    if (seed >= 0) throw UsageError("problem 'frac' is deterministic and takes no --seed");
    frac::FracConfig c = frac_config(cfg);
    if (size > 0) c.nx = c.ny = size;
    return frac::generate_bundle(c);
  }
  throw UsageError("unknown problem '" + problem + "' (expected mfd, comp, or frac)");
}

mfd::InnerProduct bundle_inner(const ProblemBundle& b) {
  try {
    const json p = json::parse(b.params_json);
    if (p.contains("inner_product") && p["inner_product"].is_string()) {
      const std::string s = p["inner_product"].get<std::string>();
      if (s == "tpfa") return mfd::InnerProduct::tpfa;
      if (s == "consistent") return mfd::InnerProduct::consistent;
    }
  } catch (const std::exception&) {
  }
  throw UsageError("bundle metadata does not record an inner product kind; "
                   "mgr_p / mgr_pi need a bundle generated by the mfd problem");
}

/// Built-in strategy names first, then a path to a strategy JSON file.
MgrStrategy resolve_strategy(const std::string& name, const ProblemBundle& b) {
  MgrStrategy s;
  if (name == "mgr_pi") s = mfd::strategy_mgr_pi(bundle_inner(b));
  else if (name == "mgr_p") s = mfd::strategy_mgr_p(bundle_inner(b));
  else if (name == "compositional") s = comp::strategy_compositional(!b.well_rows.empty());
  else if (name == "mgr_u") s = frac::strategy_mgr_u();
  else if (name == "mgr_p_frac") s = frac::strategy_mgr_p_frac();
  else if (std::filesystem::exists(name)) {
    try {
      s = strategy_from_json_file(name);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  } else {
    throw UsageError("strategy '" + name +
                     "' is neither a built-in name (mgr_p, mgr_pi, compositional, mgr_u, "
                     "mgr_p_frac) nor an existing JSON file");
  }
  if (s.name.empty()) s.name = name;

  for (std::size_t l = 0; l < s.levels.size(); ++l)
    for (const std::string& f : s.levels[l].f_fields) {
      bool known = false;
      for (const std::string& have : b.partition.field_order)
        if (have == f) known = true;
      if (!known) {
        std::string fields;
        for (const std::string& have : b.partition.field_order)
          fields += (fields.empty() ? "" : ", ") + have;
        throw UsageError("strategy level " + std::to_string(l) + " names field '" + f +
                         "' but the bundle has fields: " + fields);
      }
    }
  return s;
}

struct ReportRow {
  std::string problem;
  Index dofs = 0;
  std::string strategy;
  Real tol = 0;
  Index iterations = 0;
  double setup_seconds = 0;
  double solve_seconds = 0;
  bool converged = false;
  Real true_residual = 0;
  Vec x;
};

ReportRow run_solve(const ProblemBundle& b, const MgrStrategy& s, const std::string& sname,
                    const KrylovConfig& kc) {
  ReportRow row;
  row.problem = b.problem.empty() ? "unknown" : b.problem;
  row.dofs = b.matrix.rows();
  row.strategy = sname;
  row.tol = kc.rel_tol;

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<int>* umap = b.unknown_map.empty() ? nullptr : &b.unknown_map;
  const MgrHierarchy H = mgr_setup(b.matrix, b.partition, s, umap);
  const auto t1 = std::chrono::steady_clock::now();
  row.x = Vec::Zero(b.matrix.rows());
  const SolveReport rep = gmres(b.matrix, b.rhs, row.x, kc, mgr_preconditioner(H));
  const auto t2 = std::chrono::steady_clock::now();

  row.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
  row.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  row.iterations = rep.iterations;
  row.converged = rep.converged;
  const Real bn = b.rhs.norm();
  row.true_residual = (b.rhs - b.matrix * row.x).norm() / (bn > 0 ? bn : 1.0);
  return row;
}

std::string csv_header() {
  return "problem,dofs,strategy,tol,iterations,setup_seconds,solve_seconds,converged";
}

std::string csv_row(const ReportRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%lld,%s,%g,%lld,%.6f,%.6f,%d", r.problem.c_str(),
                static_cast<long long>(r.dofs), r.strategy.c_str(), r.tol,
                static_cast<long long>(r.iterations), r.setup_seconds, r.solve_seconds,
                r.converged ? 1 : 0);
  return buf;
}

json row_json(const ReportRow& r) {
  json j;
  j["problem"] = r.problem;
  j["dofs"] = r.dofs;
  j["strategy"] = r.strategy;
  j["tol"] = r.tol;
  j["iterations"] = r.iterations;
  j["setup_seconds"] = r.setup_seconds;
  j["solve_seconds"] = r.solve_seconds;
  j["converged"] = r.converged;
  j["true_residual"] = r.true_residual;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int cmd_generate(const std::string& problem, const std::string& config_path,
                 long long seed, const std::string& out_dir) {
  const json cfg = config_path.empty() ? json::object() : load_json(config_path);
  const ProblemBundle b = make_bundle(problem, cfg, seed, -1);
  write_bundle(b, out_dir);
  for (const std::string& w : b.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("wrote %s bundle: %lld dofs, fields", b.problem.c_str(),
              static_cast<long long>(b.matrix.rows()));
  for (const std::string& f : b.partition.field_order) std::printf(" %s", f.c_str());
  std::printf(", to %s\n", out_dir.c_str());
  return kOk;
}

int cmd_solve(const std::string& bundle_dir, const std::string& strategy_name, Real tol,
              Index restart, Index max_iters, const std::string& out_dir) {
  ProblemBundle b;
  try {
    b = read_bundle(bundle_dir);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const MgrStrategy s = resolve_strategy(strategy_name, b);
  KrylovConfig kc;
  kc.rel_tol = tol;
  kc.restart = restart;
  kc.max_iters = max_iters;
  const ReportRow row = run_solve(b, s, strategy_name, kc);

  std::filesystem::create_directories(out_dir);
  mm_write_vector(out_dir + "/x.mtx", row.x);
  write_text(out_dir + "/report.csv", csv_header() + "\n" + csv_row(row) + "\n");
  write_text(out_dir + "/report.json", row_json(row).dump(2) + "\n");

  std::printf("%s\n%s\n", csv_header().c_str(), csv_row(row).c_str());
  std::printf("true residual %.3e; solution in %s/x.mtx\n", row.true_residual,
              out_dir.c_str());
  if (!row.converged) {
    std::fprintf(stderr, "solver did not converge in %lld iterations\n",
                 static_cast<long long>(row.iterations));
    return kNoConverge;
  }
  return kOk;
}

int cmd_study(const std::string& problem, const std::string& config_path, long long seed,
              const std::vector<Index>& sizes, const std::vector<std::string>& strategies,
              Real tol, Index restart, Index max_iters, const std::string& out_dir) {
  if (sizes.size() < 2) throw UsageError("--sizes needs at least two refinements");
  if (strategies.empty()) throw UsageError("--strategies needs at least one entry");
  const json cfg = config_path.empty() ? json::object() : load_json(config_path);

  std::vector<ReportRow> rows;
  for (const Index n : sizes) {
    const ProblemBundle b = make_bundle(problem, cfg, seed, n);
    for (const std::string& sname : strategies) {
      const MgrStrategy s = resolve_strategy(sname, b);
      KrylovConfig kc;
      kc.rel_tol = tol;
      kc.restart = restart;
      kc.max_iters = max_iters;
      rows.push_back(run_solve(b, s, sname, kc));
    }
  }

  std::string csv = csv_header() + "\n";
  for (const ReportRow& r : rows) csv += csv_row(r) + "\n";

  json jout;
  jout["rows"] = json::array();
  for (const ReportRow& r : rows) jout["rows"].push_back(row_json(r));
  jout["growth"] = json::object();

  bool all_converged = true;
  for (const std::string& sname : strategies) {
    Index lo = 0, hi = 0;
    bool ok = true;
    for (const ReportRow& r : rows)
      if (r.strategy == sname) {
        if (!r.converged) ok = false;
        lo = (lo == 0) ? r.iterations : std::min(lo, r.iterations);
        hi = std::max(hi, r.iterations);
      }
    if (!ok) {
      csv += "growth," + sname + ",unconverged\n";
      jout["growth"][sname] = nullptr;
      all_converged = false;
      continue;
    }
    const double ratio = static_cast<double>(hi) / static_cast<double>(lo);
    char buf[128];
    std::snprintf(buf, sizeof buf, "growth,%s,%.4f\n", sname.c_str(), ratio);
    csv += buf;
    jout["growth"][sname] = ratio;
  }

  std::filesystem::create_directories(out_dir);
  write_text(out_dir + "/study.csv", csv);
  write_text(out_dir + "/study.json", jout.dump(2) + "\n");
  std::printf("%s", csv.c_str());
  return all_converged ? kOk : kNoConverge;
}

int cmd_verify(bool corrupt_transfer) {
  verify::VerifyOptions opts;
  opts.corrupt_transfer = corrupt_transfer;
  const auto results = verify::run_acceptance_checks(opts);
  double total = 0.0;
  for (const auto& r : results) {
    std::printf("[%s] %-42s %7.2fs  %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.seconds, r.detail.c_str());
    total += r.seconds;
  }
  const bool ok = verify::all_passed(results);
  std::printf("total %.1fs: %s\n", total, ok ? "all checks passed" : "FAILURES");
  return ok ? kOk : kNoConverge;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-structured sparse systems: generators, multigrid-reduction "
               "solvers, studies"};
  app.require_subcommand(1);

  std::string problem, config_path, bundle_dir, strategy_name, out_dir = ".";
  std::string sizes_arg, strategies_arg;
  long long seed = -1;
  Real tol = 1e-7;
  Index restart = 50, max_iters = 500;
  bool corrupt_transfer = false;

  CLI::App* gen = app.add_subcommand("generate", "Generate a problem bundle directory");
  gen->add_option("--problem", problem, "mfd | comp | frac")->required();
  gen->add_option("--config", config_path, "problem config JSON file");
  gen->add_option("--seed", seed, "override the config seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI::App* solve = app.add_subcommand("solve", "Solve a bundle with a strategy");
  solve->add_option("--bundle", bundle_dir, "bundle directory")->required();
  solve->add_option("--strategy", strategy_name, "built-in name or JSON file")->required();
  solve->add_option("--tol", tol, "relative residual tolerance");
  solve->add_option("--restart", restart, "GMRES restart length");
  solve->add_option("--max-iters", max_iters, "iteration cap");
  solve->add_option("--out", out_dir, "report/solution output directory");

  CLI::App* study = app.add_subcommand("study", "Refinement study across sizes and strategies");
  study->add_option("--problem", problem, "mfd | comp | frac")->required();
  study->add_option("--config", config_path, "problem config JSON file");
  study->add_option("--seed", seed, "override the config seed");
  study->add_option("--sizes", sizes_arg, "comma list of grid sizes, at least two")->required();
  study->add_option("--strategies", strategies_arg, "comma list of strategy names/files")
      ->required();
  study->add_option("--tol", tol, "relative residual tolerance");
  study->add_option("--restart", restart, "GMRES restart length");
  study->add_option("--max-iters", max_iters, "iteration cap");
  study->add_option("--out", out_dir, "report output directory");

  CLI::App* ver = app.add_subcommand("verify", "Run the solver invariant suite");
  ver->add_flag("--corrupt-transfer", corrupt_transfer)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(problem, config_path, seed, out_dir);
    if (solve->parsed())
      return cmd_solve(bundle_dir, strategy_name, tol, restart, max_iters, out_dir);
    if (study->parsed()) {
      std::vector<Index> sizes;
      std::stringstream ss(sizes_arg);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          sizes.push_back(std::stoll(tok));
        } catch (const std::exception&) {
          throw UsageError("--sizes entry '" + tok + "' is not an integer");
        }
      }
      std::vector<std::string> strategies;
      std::stringstream st(strategies_arg);
      while (std::getline(st, tok, ',')) strategies.push_back(tok);
      return cmd_study(problem, config_path, seed, sizes, strategies, tol, restart,
                       max_iters, out_dir);
    }
    if (ver->parsed()) return cmd_verify(corrupt_transfer);
    return kUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kInternal;
  }
}

#include "mgrkit/strategy_json.hpp"

#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mgrkit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw std::runtime_error("strategy json: " + where + ": " + msg);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) fail(where, "unknown key '" + it.key() + "'");
  }
}

Real get_real(const json& j, const char* key, Real dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) fail(where, std::string("'") + key + "' must be a number");
  return j[key].get<Real>();
}

Index get_index(const json& j, const char* key, Index dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number_integer()) fail(where, std::string("'") + key + "' must be an integer");
  return j[key].get<Index>();
}

bool get_bool(const json& j, const char* key, bool dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_boolean()) fail(where, std::string("'") + key + "' must be a boolean");
  return j[key].get<bool>();
}

SmootherKind smoother_kind_from_name(const std::string& s, const std::string& where) {
  if (s == "jacobi") return SmootherKind::jacobi;
  if (s == "l1_jacobi") return SmootherKind::l1_jacobi;
  if (s == "hybrid_l1_gs_forward") return SmootherKind::hybrid_l1_gs_forward;
  if (s == "hybrid_l1_gs_backward") return SmootherKind::hybrid_l1_gs_backward;
  if (s == "block_jacobi_exact") return SmootherKind::block_jacobi_exact;
  if (s == "amg_vcycle") return SmootherKind::amg_vcycle;
  if (s == "dense_lu") return SmootherKind::dense_lu;
  fail(where, "unknown smoother kind '" + s + "'");
}

const char* smoother_kind_name(SmootherKind k) {
  switch (k) {
    case SmootherKind::jacobi: return "jacobi";
    case SmootherKind::l1_jacobi: return "l1_jacobi";
    case SmootherKind::hybrid_l1_gs_forward: return "hybrid_l1_gs_forward";
    case SmootherKind::hybrid_l1_gs_backward: return "hybrid_l1_gs_backward";
    case SmootherKind::block_jacobi_exact: return "block_jacobi_exact";
    case SmootherKind::amg_vcycle: return "amg_vcycle";
    case SmootherKind::dense_lu: return "dense_lu";
  }
  return "jacobi";
}

AmgConfig parse_amg(const json& j, const std::string& where);

SmootherSpec parse_smoother(const json& j, const std::string& where) {
  check_keys(j, {"kind", "sweeps", "weight", "block_sizes", "partition", "amg", "use_unknown_map"},
             where);
  SmootherSpec spec;
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) fail(where, "'kind' must be a string");
    spec.kind = smoother_kind_from_name(j["kind"].get<std::string>(), where);
  }
  spec.sweeps = get_index(j, "sweeps", 1, where);
  spec.weight = get_real(j, "weight", 1.0, where);
  if (j.contains("block_sizes")) {
    if (!j["block_sizes"].is_array()) fail(where, "'block_sizes' must be an array");
    for (const auto& v : j["block_sizes"]) spec.block_sizes.push_back(v.get<Index>());
  }
  if (j.contains("partition")) {
    if (!j["partition"].is_array()) fail(where, "'partition' must be an array of [start,end]");
    for (const auto& v : j["partition"]) {
      if (!v.is_array() || v.size() != 2) fail(where, "'partition' entries must be [start,end]");
      spec.partition.push_back({v[0].get<Index>(), v[1].get<Index>()});
    }
  }
  if (j.contains("amg")) spec.amg = std::make_shared<AmgConfig>(parse_amg(j["amg"], where + ".amg"));
  spec.use_unknown_map = get_bool(j, "use_unknown_map", false, where);
  return spec;
}

AmgConfig parse_amg(const json& j, const std::string& where) {
  check_keys(j, {"strength_theta", "max_levels", "coarse_size", "pre_smoother", "post_smoother"},
             where);
  AmgConfig cfg;
  cfg.strength_theta = get_real(j, "strength_theta", cfg.strength_theta, where);
  cfg.max_levels = get_index(j, "max_levels", cfg.max_levels, where);
  cfg.coarse_size = get_index(j, "coarse_size", cfg.coarse_size, where);
  if (j.contains("pre_smoother")) cfg.pre_smoother = parse_smoother(j["pre_smoother"], where + ".pre_smoother");
  if (j.contains("post_smoother"))
    cfg.post_smoother = parse_smoother(j["post_smoother"], where + ".post_smoother");
  return cfg;
}

InterpKind parse_interp(const json& j, const std::string& where) {
  const std::string s = j.get<std::string>();
  if (s == "ideal") return InterpKind::ideal;
  if (s == "jacobi") return InterpKind::jacobi;
  fail(where, "unknown interp kind '" + s + "' (expected ideal|jacobi)");
}

RestrictKind parse_restrict(const json& j, const std::string& where) {
  const std::string s = j.get<std::string>();
  if (s == "injection") return RestrictKind::injection;
  if (s == "jacobi") return RestrictKind::jacobi;
  if (s == "ideal") return RestrictKind::ideal;
  fail(where, "unknown restrict kind '" + s + "' (expected injection|jacobi|ideal)");
}

MgrLevelSpec parse_level(const json& j, const std::string& where) {
  check_keys(j, {"f_fields", "interp", "restrict", "f_relax", "global_relax", "ff_block_sizes"},
             where);
  MgrLevelSpec lvl;
  if (!j.contains("f_fields") || !j["f_fields"].is_array() || j["f_fields"].empty())
    fail(where, "'f_fields' must be a non-empty array of field names");
  for (const auto& v : j["f_fields"]) lvl.f_fields.push_back(v.get<std::string>());
  if (j.contains("interp")) lvl.interp = parse_interp(j["interp"], where);
  if (j.contains("restrict")) lvl.restrict_kind = parse_restrict(j["restrict"], where);
  if (j.contains("f_relax")) lvl.f_relax = parse_smoother(j["f_relax"], where + ".f_relax");
  if (j.contains("global_relax"))
    lvl.global_relax = parse_smoother(j["global_relax"], where + ".global_relax");
  if (j.contains("ff_block_sizes")) {
    std::vector<Index> sizes;
    for (const auto& v : j["ff_block_sizes"]) sizes.push_back(v.get<Index>());
    lvl.ff_block_sizes = std::move(sizes);
  }
  return lvl;
}

CoarseSolverSpec parse_coarse(const json& j, const std::string& where) {
  check_keys(j, {"kind", "cycles", "use_unknown_map", "amg", "krylov"}, where);
  CoarseSolverSpec c;
  if (j.contains("kind")) {
    const std::string s = j["kind"].get<std::string>();
    if (s == "dense_lu")
      c.kind = CoarseSolverSpec::Kind::dense_lu;
    else if (s == "amg_vcycle")
      c.kind = CoarseSolverSpec::Kind::amg_vcycle;
    else if (s == "gmres_inner")
      c.kind = CoarseSolverSpec::Kind::gmres_inner;
    else
      fail(where, "unknown coarse solver kind '" + s + "'");
  }
  c.amg_cycles = get_index(j, "cycles", 1, where);
  c.use_unknown_map = get_bool(j, "use_unknown_map", false, where);
  if (j.contains("amg")) c.amg = parse_amg(j["amg"], where + ".amg");
  if (j.contains("krylov")) {
    const json& k = j["krylov"];
    const std::string kw = where + ".krylov";
    check_keys(k, {"restart", "max_iters", "rel_tol", "abs_tol"}, kw);
    c.krylov.restart = get_index(k, "restart", c.krylov.restart, kw);
    c.krylov.max_iters = get_index(k, "max_iters", c.krylov.max_iters, kw);
    c.krylov.rel_tol = get_real(k, "rel_tol", c.krylov.rel_tol, kw);
    c.krylov.abs_tol = get_real(k, "abs_tol", c.krylov.abs_tol, kw);
  }
  return c;
}

json smoother_to_json(const SmootherSpec& s);

json amg_to_json(const AmgConfig& cfg) {
  json j;
  j["strength_theta"] = cfg.strength_theta;
  j["max_levels"] = cfg.max_levels;
  j["coarse_size"] = cfg.coarse_size;
  j["pre_smoother"] = smoother_to_json(cfg.pre_smoother);
  j["post_smoother"] = smoother_to_json(cfg.post_smoother);
  return j;
}

json smoother_to_json(const SmootherSpec& s) {
  json j;
  j["kind"] = smoother_kind_name(s.kind);
  j["sweeps"] = s.sweeps;
  j["weight"] = s.weight;
  if (!s.block_sizes.empty()) j["block_sizes"] = s.block_sizes;
  if (!s.partition.empty()) {
    json p = json::array();
    for (const auto& r : s.partition) p.push_back({r.first, r.second});
    j["partition"] = p;
  }
  if (s.amg) j["amg"] = amg_to_json(*s.amg);
  if (s.use_unknown_map) j["use_unknown_map"] = true;
  return j;
}

}  // namespace

MgrStrategy strategy_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("strategy json: parse error: ") + e.what());
  }
  check_keys(j, {"name", "levels", "coarse"}, "top level");
  MgrStrategy s;
  if (j.contains("name")) s.name = j["name"].get<std::string>();
  if (j.contains("levels")) {
    if (!j["levels"].is_array()) fail("top level", "'levels' must be an array");
    Index i = 0;
    for (const auto& lj : j["levels"]) {
      s.levels.push_back(parse_level(lj, "levels[" + std::to_string(i) + "]"));
      ++i;
    }
  }
  if (j.contains("coarse")) s.coarse = parse_coarse(j["coarse"], "coarse");
  return s;
}

MgrStrategy strategy_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("strategy json: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return strategy_from_json_text(ss.str());
}

std::string strategy_to_json_text(const MgrStrategy& strategy) {
  json j;
  j["name"] = strategy.name;
  json levels = json::array();
  for (const auto& lvl : strategy.levels) {
    json lj;
    lj["f_fields"] = lvl.f_fields;
    lj["interp"] = lvl.interp == InterpKind::ideal ? "ideal" : "jacobi";
    lj["restrict"] = lvl.restrict_kind == RestrictKind::injection ? "injection"
                     : lvl.restrict_kind == RestrictKind::jacobi ? "jacobi"
                                                                 : "ideal";
    lj["f_relax"] = smoother_to_json(lvl.f_relax);
    if (lvl.global_relax) lj["global_relax"] = smoother_to_json(*lvl.global_relax);
    if (lvl.ff_block_sizes) lj["ff_block_sizes"] = *lvl.ff_block_sizes;
    levels.push_back(lj);
  }
  j["levels"] = levels;
  json c;
  c["kind"] = strategy.coarse.kind == CoarseSolverSpec::Kind::dense_lu     ? "dense_lu"
              : strategy.coarse.kind == CoarseSolverSpec::Kind::amg_vcycle ? "amg_vcycle"
                                                                           : "gmres_inner";
  if (strategy.coarse.kind == CoarseSolverSpec::Kind::amg_vcycle) {
    c["cycles"] = strategy.coarse.amg_cycles;
    c["amg"] = amg_to_json(strategy.coarse.amg);
    if (strategy.coarse.use_unknown_map) c["use_unknown_map"] = true;
  }
  if (strategy.coarse.kind == CoarseSolverSpec::Kind::gmres_inner) {
    json k;
    k["restart"] = strategy.coarse.krylov.restart;
    k["max_iters"] = strategy.coarse.krylov.max_iters;
    k["rel_tol"] = strategy.coarse.krylov.rel_tol;
    k["abs_tol"] = strategy.coarse.krylov.abs_tol;
    c["krylov"] = k;
  }
  j["coarse"] = c;
  return j.dump(2) + "\n";
}

void strategy_to_json_file(const MgrStrategy& strategy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("strategy json: cannot write " + path);
  out << strategy_to_json_text(strategy);
}

}  // namespace mgrkit

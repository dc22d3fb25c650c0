#include "mgrkit/bundle.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mgrkit/matrix_market.hpp"

namespace mgrkit {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("bundle: cannot open " + path);
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("bundle: " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("bundle: cannot write " + path);
  out << text;
}

}  // namespace

void write_bundle(const ProblemBundle& bundle, const std::string& dir) {
  const Index n = bundle.matrix.rows();
  if (bundle.rhs.size() != n) throw std::runtime_error("bundle: rhs length does not match matrix");
  if (static_cast<Index>(bundle.partition.labels.size()) != n)
    throw std::runtime_error("bundle: label count does not match matrix");

  std::filesystem::create_directories(dir);
  mm_write(dir + "/matrix.mtx", bundle.matrix);
  mm_write_vector(dir + "/rhs.mtx", bundle.rhs);

  json labels;
  labels["field_order"] = bundle.partition.field_order;
  labels["labels"] = bundle.partition.labels;
  write_text(dir + "/labels.json", labels.dump(2) + "\n");

  json meta;
  meta["problem"] = bundle.problem;
  meta["dofs"] = n;
  meta["unknown_map"] = bundle.unknown_map;
  meta["well_rows"] = bundle.well_rows;
  meta["warnings"] = bundle.warnings;
  if (bundle.params_json.empty()) {
    meta["params"] = json::object();
  } else {
    try {
      meta["params"] = json::parse(bundle.params_json);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("bundle: params_json is not valid JSON: ") + e.what());
    }
  }
  write_text(dir + "/meta.json", meta.dump(2) + "\n");
}

ProblemBundle read_bundle(const std::string& dir) {
  ProblemBundle b;
  b.matrix = mm_read(dir + "/matrix.mtx");
  b.rhs = mm_read_vector(dir + "/rhs.mtx");

  const json labels = read_json_file(dir + "/labels.json");
  if (!labels.contains("field_order") || !labels.contains("labels"))
    throw std::runtime_error("bundle: labels.json must contain field_order and labels");
  std::vector<std::string> field_order =
      labels["field_order"].get<std::vector<std::string>>();
  std::vector<Index> ids = labels["labels"].get<std::vector<Index>>();

  const Index n = b.matrix.rows();
  if (b.matrix.cols() != n) throw std::runtime_error("bundle: matrix is not square");
  if (b.rhs.size() != n) throw std::runtime_error("bundle: rhs length does not match matrix");
  if (static_cast<Index>(ids.size()) != n)
    throw std::runtime_error("bundle: label count does not match matrix size");
  for (Index id : ids)
    if (id < 0 || id >= static_cast<Index>(field_order.size()))
      throw std::runtime_error("bundle: label id out of range");
  b.partition.field_order = std::move(field_order);
  b.partition.labels = std::move(ids);

  const json meta = read_json_file(dir + "/meta.json");
  if (meta.contains("problem")) b.problem = meta["problem"].get<std::string>();
  if (meta.contains("unknown_map")) b.unknown_map = meta["unknown_map"].get<std::vector<int>>();
  if (meta.contains("well_rows")) b.well_rows = meta["well_rows"].get<std::vector<Index>>();
  if (meta.contains("warnings")) b.warnings = meta["warnings"].get<std::vector<std::string>>();
  if (meta.contains("params")) b.params_json = meta["params"].dump();
  if (!b.unknown_map.empty() && static_cast<Index>(b.unknown_map.size()) != n)
    throw std::runtime_error("bundle: unknown_map length does not match matrix size");
  return b;
}

}  // namespace mgrkit

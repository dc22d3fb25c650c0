#include "mgrkit/matrix_market.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mgrkit/sparse.hpp"

namespace mgrkit {

namespace {

[[noreturn]] void parse_error(const std::string& path, long line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Banner {
  std::string object, format, field, symmetry;
};

Banner read_banner(std::ifstream& in, const std::string& path, long& line_no) {
  std::string line;
  if (!std::getline(in, line)) parse_error(path, 1, "empty file");
  ++line_no;
  std::istringstream ss(line);
  std::string tag;
  Banner b;
  ss >> tag >> b.object >> b.format >> b.field >> b.symmetry;
  if (tag != "%%MatrixMarket") parse_error(path, line_no, "missing %%MatrixMarket banner");
  b.object = lower(b.object);
  b.format = lower(b.format);
  b.field = lower(b.field);
  b.symmetry = lower(b.symmetry);
  if (b.object != "matrix") parse_error(path, line_no, "unsupported object '" + b.object + "'");
  if (b.field != "real" && b.field != "integer")
    parse_error(path, line_no, "unsupported field '" + b.field + "'");
  return b;
}

// Advance past comment/blank lines; returns false at EOF.
bool next_data_line(std::ifstream& in, std::string& line, long& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace

SpMat mm_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  long line_no = 0;
  Banner b = read_banner(in, path, line_no);
  if (b.format != "coordinate") parse_error(path, line_no, "expected coordinate format");
  bool symmetric = b.symmetry == "symmetric";
  if (!symmetric && b.symmetry != "general")
    parse_error(path, line_no, "unsupported symmetry '" + b.symmetry + "'");

  std::string line;
  if (!next_data_line(in, line, line_no)) parse_error(path, line_no, "missing size line");
  long rows, cols, nnz;
  {
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
      parse_error(path, line_no, "malformed size line");
  }
  std::vector<Triplet> ts;
  ts.reserve(static_cast<size_t>(symmetric ? 2 * nnz : nnz));
  for (long k = 0; k < nnz; ++k) {
    if (!next_data_line(in, line, line_no)) parse_error(path, line_no, "unexpected end of file");
    std::istringstream ss(line);
    long i, j;
    double v;
    if (!(ss >> i >> j >> v)) parse_error(path, line_no, "malformed entry");
    if (i < 1 || i > rows || j < 1 || j > cols) parse_error(path, line_no, "index out of range");
    if (!std::isfinite(v)) parse_error(path, line_no, "non-finite value");
    ts.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), v);
    if (symmetric && i != j) ts.emplace_back(static_cast<Index>(j - 1), static_cast<Index>(i - 1), v);
  }
  return from_triplets(static_cast<Index>(rows), static_cast<Index>(cols), ts);
}

void mm_write(const std::string& path, const SpMat& A) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  std::fprintf(f, "%%%%MatrixMarket matrix coordinate real general\n");
  std::fprintf(f, "%ld %ld %ld\n", static_cast<long>(A.rows()), static_cast<long>(A.cols()),
               static_cast<long>(A.nonZeros()));
  for (Index i = 0; i < A.rows(); ++i)
    for (SpMat::InnerIterator it(A, i); it; ++it)
      std::fprintf(f, "%ld %ld %.17g\n", static_cast<long>(i + 1), static_cast<long>(it.col() + 1),
                   it.value());
  std::fclose(f);
}

Vec mm_read_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  long line_no = 0;
  Banner b = read_banner(in, path, line_no);
  if (b.format == "coordinate") {
    in.close();
    SpMat A = mm_read(path);
    if (A.cols() != 1) throw std::runtime_error(path + ": expected a single column vector");
    return Vec(A);
  }
  if (b.format != "array") parse_error(path, line_no, "expected array or coordinate format");
  std::string line;
  if (!next_data_line(in, line, line_no)) parse_error(path, line_no, "missing size line");
  long rows, cols;
  {
    std::istringstream ss(line);
    if (!(ss >> rows >> cols) || rows < 0 || cols != 1)
      parse_error(path, line_no, "expected an n x 1 array");
  }
  Vec v(rows);
  for (long k = 0; k < rows; ++k) {
    if (!next_data_line(in, line, line_no)) parse_error(path, line_no, "unexpected end of file");
    std::istringstream ss(line);
    if (!(ss >> v[k])) parse_error(path, line_no, "malformed value");
    if (!std::isfinite(v[k])) parse_error(path, line_no, "non-finite value");
  }
  return v;
}

void mm_write_vector(const std::string& path, const Vec& v) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  std::fprintf(f, "%%%%MatrixMarket matrix array real general\n");
  std::fprintf(f, "%ld 1\n", static_cast<long>(v.size()));
  for (Index i = 0; i < v.size(); ++i) std::fprintf(f, "%.17g\n", v[i]);
  std::fclose(f);
}

}  // namespace mgrkit

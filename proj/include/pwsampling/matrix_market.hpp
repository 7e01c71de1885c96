#pragma once

// Matrix Market coordinate files for operators. The writer emits the lower
// triangle of a symmetric real matrix, 1-based, columns in order, values
// printed with %.17g so that a round trip is exact. The reader accepts
// symmetric and general coordinate files; any asymmetry is reported as a
// SymmetryError naming the offending entry.

#include <Eigen/SparseCore>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pwsampling/errors.hpp"
#include "pwsampling/operator.hpp"

namespace pws {

namespace detail {

inline std::string lower_copy(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

}  // namespace detail

inline void write_matrix_market(std::ostream& os, const SymmetricOperator& op,
                                const std::vector<std::string>& comments = {}) {
  if (!op.is_symmetric()) throw SymmetryError("symmetry check failed: refusing to write an asymmetric operator");
  const SparseMatrix& a = op.matrix();
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> lower;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(a, c); it; ++it)
      if (it.row() >= it.col()) lower.emplace_back(it.row(), it.col(), it.value());
  os << "%%MatrixMarket matrix coordinate real symmetric\n";
  os << "% backend: " << backend_name(op.backend()) << "\n";
  for (const auto& c : comments) os << "% " << c << "\n";
  os << op.dimension() << " " << op.dimension() << " " << lower.size() << "\n";
  for (const auto& [r, c, v] : lower) os << r + 1 << " " << c + 1 << " " << detail::format_double(v) << "\n";
}

inline void write_matrix_market(const std::string& path, const SymmetricOperator& op,
                                const std::vector<std::string>& comments = {}) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open '" + path + "' for writing");
  write_matrix_market(os, op, comments);
  if (!os) throw ParseError("write to '" + path + "' failed");
}

/// Reads a coordinate file. A "% backend: name" comment sets the backend
/// (generic otherwise). Stored values of a symmetric file must lie on or
/// below the diagonal, and general files must match their transpose exactly.
inline SymmetricOperator read_matrix_market(std::istream& is, const std::string& source = "<stream>") {
  std::string line;
  auto fail = [&](const std::string& msg) -> ParseError { return ParseError(source + ": " + msg); };
  if (!std::getline(is, line)) throw fail("empty file");
  std::istringstream head(line);
  std::string banner, object, format, field, symmetry;
  head >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw fail("missing %%MatrixMarket banner");
  object = detail::lower_copy(object);
  format = detail::lower_copy(format);
  field = detail::lower_copy(field);
  symmetry = detail::lower_copy(symmetry);
  if (object != "matrix" || format != "coordinate") throw fail("only 'matrix coordinate' files are supported");
  if (field != "real" && field != "integer" && field != "double") throw fail("unsupported field '" + field + "'");
  if (symmetry != "symmetric" && symmetry != "general") throw fail("unsupported symmetry '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  Backend backend = Backend::generic;
  long long rows = -1, cols = -1, entries = -1;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '%') {
      const std::string key = "% backend:";
      if (line.compare(0, key.size(), key) == 0) {
        std::istringstream b(line.substr(key.size()));
        std::string name;
        b >> name;
        try {
          backend = parse_backend(name);
        } catch (const ParseError&) {
          throw fail("line " + std::to_string(line_no) + ": unknown backend '" + name + "'");
        }
      }
      continue;
    }
    std::istringstream size_line(line);
    if (!(size_line >> rows >> cols >> entries)) throw fail("line " + std::to_string(line_no) + ": bad size line");
    break;
  }
  if (rows < 0) throw fail("missing size line");
  if (rows != cols) throw fail("matrix is not square");
  if (entries < 0) throw fail("negative entry count");

  std::map<std::pair<long long, long long>, double> stored;
  long long seen = 0;
  while (seen < entries && std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream e(line);
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(e >> i >> j >> v)) throw fail("line " + std::to_string(line_no) + ": bad entry");
    std::string extra;
    if (e >> extra) throw fail("line " + std::to_string(line_no) + ": trailing data");
    if (i < 1 || j < 1 || i > rows || j > cols) throw fail("line " + std::to_string(line_no) + ": index out of range");
    --i;
    --j;
    if (symmetric && i < j) {
      throw SymmetryError(source + ": symmetry check failed: entry (" + std::to_string(i + 1) + ", " +
                          std::to_string(j + 1) + ") lies above the diagonal of a symmetric file");
    }
    const auto key = std::make_pair(i, j);
    if (stored.count(key)) throw fail("line " + std::to_string(line_no) + ": duplicate entry");
    stored[key] = v;
    ++seen;
  }
  if (seen < entries) throw fail("expected " + std::to_string(entries) + " entries, found " + std::to_string(seen));
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos && line[0] != '%')
      throw fail("line " + std::to_string(line_no) + ": data after the declared entries");
  }

  std::vector<Eigen::Triplet<double, std::int64_t>> trip;
  for (const auto& [key, v] : stored) {
    const auto [i, j] = key;
    if (!symmetric) {
      const auto it = stored.find({j, i});
      const double mirror = it == stored.end() ? 0.0 : it->second;
      if (mirror != v) {
        throw SymmetryError(source + ": symmetry check failed: a(" + std::to_string(i + 1) + "," +
                            std::to_string(j + 1) + ") = " + detail::format_double(v) + " but a(" +
                            std::to_string(j + 1) + "," + std::to_string(i + 1) + ") = " +
                            detail::format_double(mirror));
      }
    }
    if (v == 0.0) continue;
    trip.emplace_back(i, j, v);
    if (symmetric && i != j) trip.emplace_back(j, i, v);
  }
  SparseMatrix a(rows, cols);
  a.setFromTriplets(trip.begin(), trip.end());
  SymmetricOperator op(std::move(a), backend);
  if (!op.is_symmetric()) throw SymmetryError(source + ": symmetry check failed");
  return op;
}

inline SymmetricOperator read_matrix_market(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open '" + path + "'");
  return read_matrix_market(is, path);
}

}  // namespace pws

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qmarg/experiments.hpp"
#include "qmarg/marginals.hpp"
#include "qmarg/reconstruct.hpp"

// File formats
//
//   marginals: {"dims": [2,2,2],
//               "marginals": [{"parties": [0,1], "matrix": [[[re,im], ...], ...]}, ...]}
//   state:     {"dims": [2,2,2], "matrix": [[[re,im], ...], ...]}
//
// Matrices are row-major; row index is the mixed-radix digit string of the
// listed sites with the lowest site most significant. Numbers are written
// with 17 significant digits.

namespace qmarg::io {

using json = nlohmann::json;

inline constexpr double kFileTol = 1e-8;

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix(std::ostream& os, const Matrix& m, const std::string& indent) {
  os << "[\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    os << indent << "  [";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ", ";
      os << "[" << format_double(m(r, c).real()) << ", " << format_double(m(r, c).imag()) << "]";
    }
    os << "]" << (r + 1 < m.rows() ? "," : "") << "\n";
  }
  os << indent << "]";
}

inline void write_dims(std::ostream& os, const SystemShape& shape) {
  os << "[";
  for (std::size_t i = 0; i < shape.sites(); ++i) os << (i ? ", " : "") << shape.dim(i);
  os << "]";
}

inline double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

inline Matrix parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows) {
      throw ValidationError(where + ": matrix is not square (row " + std::to_string(r) + ")");
    }
    for (Eigen::Index c = 0; c < rows; ++c) {
      const auto& z = row[static_cast<std::size_t>(c)];
      const std::string at = where + ": entry (" + std::to_string(r) + "," + std::to_string(c) + ")";
      if (!z.is_array() || z.size() != 2) throw ParseError(at + ": expected [re, im]");
      m(r, c) = Complex(as_number(z[0], at), as_number(z[1], at));
    }
  }
  return m;
}

inline SystemShape parse_dims(const json& j) {
  if (!j.contains("dims") || !j["dims"].is_array()) throw ParseError("missing \"dims\" array");
  std::vector<std::size_t> dims;
  for (const auto& d : j["dims"]) {
    if (!d.is_number_integer() || d.get<long long>() < 2) {
      throw ValidationError("dims: every local dimension must be an integer >= 2");
    }
    dims.push_back(d.get<std::size_t>());
  }
  return SystemShape(std::move(dims));
}

inline json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

/// Hermiticity, trace and positivity checks at file tolerance.
inline DensityMatrix validated_state(SystemShape shape, Matrix m, const std::string& where) {
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (!(herm <= kFileTol)) {
    throw ValidationError(where + ": matrix is not Hermitian (max |A - A^dag| = " +
                          format_double(herm) + ")");
  }
  const double tr = m.trace().real();
  if (!(std::abs(tr - 1.0) <= kFileTol)) {
    throw ValidationError(where + ": trace is " + format_double(tr) + ", expected 1");
  }
  try {
    const double tol = default_psd_tol(shape);
    return DensityMatrix::certify(HermitianOperator(std::move(shape), std::move(m)), tol, kFileTol,
                                  kFileTol);
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("error writing " + path);
}

}  // namespace detail

inline std::string marginals_to_string(const MarginalSet& set) {
  std::ostringstream os;
  os << "{\n  \"dims\": ";
  detail::write_dims(os, set.shape());
  os << ",\n  \"marginals\": [";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& e = set[i];
    os << (i ? ",\n" : "\n") << "    {\n      \"parties\": [";
    for (std::size_t p = 0; p < e.parties.size(); ++p) os << (p ? ", " : "") << e.parties.indices()[p];
    os << "],\n      \"matrix\": ";
    detail::write_matrix(os, e.state.matrix(), "      ");
    os << "\n    }";
  }
  os << "\n  ]\n}\n";
  return os.str();
}

inline MarginalSet marginals_from_string(const std::string& text) {
  const json j = detail::parse_text(text);
  if (!j.is_object()) throw ParseError("top level must be an object");
  const auto shape = detail::parse_dims(j);
  if (!j.contains("marginals") || !j["marginals"].is_array()) {
    throw ParseError("missing \"marginals\" array");
  }
  MarginalSet set(shape);
  std::set<std::vector<std::size_t>> seen;
  std::size_t idx = 0;
  for (const auto& e : j["marginals"]) {
    const std::string where = "marginal " + std::to_string(idx++);
    if (!e.is_object() || !e.contains("parties") || !e["parties"].is_array()) {
      throw ParseError(where + ": missing \"parties\" array");
    }
    std::vector<std::size_t> parties;
    for (const auto& p : e["parties"]) {
      if (!p.is_number_integer() || p.get<long long>() < 0) {
        throw ValidationError(where + ": parties must be non-negative integers");
      }
      const auto s = p.get<std::size_t>();
      if (s >= shape.sites()) {
        throw ValidationError(where + ": party index " + std::to_string(s) + " out of range");
      }
      if (!parties.empty() && s == parties.back()) {
        throw ValidationError(where + ": duplicate index " + std::to_string(s) + " in parties");
      }
      if (!parties.empty() && s < parties.back()) {
        throw ValidationError(where + ": parties must be sorted");
      }
      parties.push_back(s);
    }
    if (!seen.insert(parties).second) {
      throw ValidationError(where + ": duplicate party set");
    }
    const PartySubset subset(parties);
    const auto sub = shape.restrict(subset);
    if (!e.contains("matrix")) throw ParseError(where + ": missing \"matrix\"");
    Matrix m = detail::parse_matrix(e["matrix"], where);
    if (static_cast<std::size_t>(m.rows()) != sub.total_dim()) {
      throw ValidationError(where + ": matrix dimension " + std::to_string(m.rows()) +
                            " does not match dims over parties (" + std::to_string(sub.total_dim()) +
                            ")");
    }
    set.add(subset, detail::validated_state(sub, std::move(m), where));
  }
  return set;
}

inline std::string state_to_string(const DensityMatrix& state) {
  std::ostringstream os;
  os << "{\n  \"dims\": ";
  detail::write_dims(os, state.shape());
  os << ",\n  \"matrix\": ";
  detail::write_matrix(os, state.matrix(), "  ");
  os << "\n}\n";
  return os.str();
}

inline DensityMatrix state_from_string(const std::string& text) {
  const json j = detail::parse_text(text);
  if (!j.is_object()) throw ParseError("top level must be an object");
  auto shape = detail::parse_dims(j);
  if (!j.contains("matrix")) throw ParseError("missing \"matrix\"");
  Matrix m = detail::parse_matrix(j["matrix"], "state");
  if (static_cast<std::size_t>(m.rows()) != shape.total_dim()) {
    throw ValidationError("state: matrix dimension " + std::to_string(m.rows()) +
                          " does not match dims (" + std::to_string(shape.total_dim()) + ")");
  }
  return detail::validated_state(std::move(shape), std::move(m), "state");
}

inline MarginalSet load_marginals(const std::string& path) {
  return marginals_from_string(detail::read_file(path));
}
inline void save_marginals(const std::string& path, const MarginalSet& set) {
  detail::write_file(path, marginals_to_string(set));
}
inline DensityMatrix load_state(const std::string& path) {
  return state_from_string(detail::read_file(path));
}
inline void save_state(const std::string& path, const DensityMatrix& state) {
  detail::write_file(path, state_to_string(state));
}

// CSV

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "iter,D_lambda,D_M,D_T\n";
  for (const auto& r : rows) {
    os << r.iter << "," << detail::format_double(r.d_lambda) << "," << detail::format_double(r.d_m)
       << "," << detail::format_double(r.d_t) << "\n";
  }
}

inline constexpr const char* kFractionCsvHeader = "n,k,samples,successes,fraction,seed,seconds";

inline std::string fraction_csv_row(const FractionResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.6f,%llu,%.3f", r.n, r.k, r.samples, r.successes,
                r.fraction, static_cast<unsigned long long>(r.master_seed), r.wall_time);
  return buf;
}

/// Text table with one row per k and one column per n; "-" marks cells
/// that were not run or are undefined (k >= n).
inline std::string render_fraction_table(const std::vector<FractionResult>& results) {
  std::set<std::size_t> ns, ks;
  std::map<std::pair<std::size_t, std::size_t>, double> cell;
  for (const auto& r : results) {
    ns.insert(r.n);
    ks.insert(r.k);
    cell[{r.k, r.n}] = r.fraction;
  }
  std::ostringstream os;
  os << "  k\\n |";
  for (auto n : ns) {
    char b[16];
    std::snprintf(b, sizeof b, "%6zu", n);
    os << b;
  }
  os << "\n" << std::string(8 + 6 * ns.size(), '-') << "\n";
  for (auto k : ks) {
    char b[16];
    std::snprintf(b, sizeof b, "%5zu  |", k);
    os << b;
    for (auto n : ns) {
      auto it = cell.find({k, n});
      if (it == cell.end()) {
        os << "     -";
      } else {
        std::snprintf(b, sizeof b, " %5.3f", it->second);
        os << b;
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace qmarg::io

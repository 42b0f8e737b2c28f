#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "model.hpp"

namespace fastloo {

enum class CsvErrorKind { Unreadable, Empty, Ragged, NonNumeric, Shape };

inline const char* to_string(CsvErrorKind k) {
  switch (k) {
    case CsvErrorKind::Unreadable: return "unreadable";
    case CsvErrorKind::Empty: return "empty";
    case CsvErrorKind::Ragged: return "ragged";
    case CsvErrorKind::NonNumeric: return "non-numeric";
    case CsvErrorKind::Shape: return "shape";
  }
  return "?";
}

class CsvError : public InputError {
 public:
  CsvError(CsvErrorKind kind, const std::string& what) : InputError(what), kind_(kind) {}
  CsvErrorKind kind() const { return kind_; }

 private:
  CsvErrorKind kind_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses comma-separated numeric rows. Blank lines are skipped; every row
/// must have the same number of cells.
inline MatrixXd parse_csv(std::istream& in, bool header, const std::string& name = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  if (header) {
    std::getline(in, line);
    ++lineno;
  }
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view cell = rest.substr(0, comma);
      double v = 0.0;
      if (!detail::parse_double(cell, v))
        throw CsvError(CsvErrorKind::NonNumeric, name + ":" + std::to_string(lineno) + ": non-numeric cell '" +
                                                     std::string(detail::trim(cell)) + "'");
      if (!std::isfinite(v))
        throw CsvError(CsvErrorKind::NonNumeric,
                       name + ":" + std::to_string(lineno) + ": non-finite cell '" + std::string(detail::trim(cell)) + "'");
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw CsvError(CsvErrorKind::Ragged, name + ":" + std::to_string(lineno) + ": expected " +
                                               std::to_string(cols) + " cells, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw CsvError(CsvErrorKind::Empty, name + ": no data rows");
  MatrixXd out(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = values[r * cols + c];
  return out;
}

inline MatrixXd read_csv_matrix(const std::string& path, bool header = false) {
  std::ifstream in(path);
  if (!in) throw CsvError(CsvErrorKind::Unreadable, path + ": cannot open file");
  return parse_csv(in, header, path);
}

/// Reads a single-column CSV (or a single row) as a vector.
inline VectorXd read_csv_vector(const std::string& path, bool header = false) {
  const MatrixXd m = read_csv_matrix(path, header);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw CsvError(CsvErrorKind::Shape, path + ": expected a single column, found " + std::to_string(m.cols()));
}

/// Shortest text that holds 17 significant digits, so the value reads back exactly.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& out, const MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_number(m(r, c));
    }
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw CsvError(CsvErrorKind::Unreadable, path + ": cannot open for writing");
  write_csv(out, m);
}

/// Centres every column and scales it to unit Euclidean norm; constant
/// columns are left at zero.
inline MatrixXd standardize_columns(MatrixXd A) {
  for (Index j = 0; j < A.cols(); ++j) {
    A.col(j).array() -= A.col(j).mean();
    const double n = A.col(j).norm();
    if (n > 0.0) A.col(j) /= n;
  }
  return A;
}

/// Number of points in an automatic grid when none is given.
inline constexpr int kAutoGridPoints = 50;
/// Decades spanned by an automatic grid below lambda_max.
inline constexpr double kAutoGridDecades = 4.0;

/// Penalty grid from a textual spec:
///   "auto" or "auto:K"   K points from lambda_max down four decades
///   "K" (digits only)    same as auto:K
///   "log:HI:LO:K"        K log-spaced points between HI and LO
///   "a,b,c" or "a"       explicit values (write "2.0" for a single integer penalty)
/// The result is strictly descending; ascending explicit lists are reversed.
inline std::vector<double> parse_lambda_spec(const std::string& spec, double lambda_max,
                                             bool* reversed = nullptr) {
  if (reversed) *reversed = false;
  const auto bad = [&](const std::string& why) { return InputError("bad lambda spec '" + spec + "': " + why); };
  const auto to_int = [&](std::string_view s) {
    int k = 0;
    s = detail::trim(s);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), k);
    if (ec != std::errc() || p != s.data() + s.size() || k < 1) throw bad("expected a positive count");
    return k;
  };
  const auto auto_grid = [&](int k) {
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max))
      throw bad("automatic grid needs a positive lambda_max (is y orthogonal to every column?)");
    if (k == 1) return std::vector<double>{lambda_max};
    return log_grid(lambda_max, lambda_max * std::pow(10.0, -kAutoGridDecades), k);
  };

  std::string_view s = detail::trim(spec);
  if (s == "auto") return auto_grid(kAutoGridPoints);
  if (s.rfind("auto:", 0) == 0) return auto_grid(to_int(s.substr(5)));
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return auto_grid(to_int(s));
  if (s.rfind("log:", 0) == 0) {
    std::vector<std::string_view> parts;
    std::string_view rest = s.substr(4);
    for (std::size_t pos; (pos = rest.find(':')) != std::string_view::npos;) {
      parts.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    parts.push_back(rest);
    if (parts.size() != 3) throw bad("expected log:HI:LO:COUNT");
    double hi = 0.0, lo = 0.0;
    if (!detail::parse_double(parts[0], hi) || !detail::parse_double(parts[1], lo)) throw bad("non-numeric bound");
    if (!(hi > 0.0 && lo > 0.0)) throw bad("bounds must be positive");
    if (hi < lo) std::swap(hi, lo);
    const int k = to_int(parts[2]);
    if (k == 1) return {hi};
    if (hi == lo) throw bad("bounds must differ");
    return log_grid(hi, lo, k);
  }
  std::vector<double> grid;
  std::string_view rest = s;
  while (true) {
    const auto comma = rest.find(',');
    double v = 0.0;
    if (!detail::parse_double(rest.substr(0, comma), v)) throw bad("non-numeric value");
    if (!(v > 0.0) || !std::isfinite(v)) throw bad("penalties must be positive");
    grid.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return normalize_lambda_grid(std::move(grid), reversed);
}

}  // namespace fastloo

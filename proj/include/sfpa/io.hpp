#pragma once

// Matrix ingestion (delimited text and a small binary container) and the
// preprocessing transforms applied before selection.
//
// Row and column centering make the noise entries weakly dependent, which
// departs from the independent-entries model; it is nonetheless standard
// practice before PA and is offered as-is.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "sfpa/error.hpp"
#include "sfpa/matrix.hpp"

namespace sfpa {

// Row-major n x p flags; true marks a missing cell.
class MissingMask {
 public:
  MissingMask() = default;
  MissingMask(std::size_t n, std::size_t p) : n_(n), p_(p), cells_(n * p, 0) {}

  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return p_; }
  bool operator()(std::size_t i, std::size_t j) const { return cells_[i * p_ + j] != 0; }
  void set(std::size_t i, std::size_t j) { cells_[i * p_ + j] = 1; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1)); }
  bool empty() const { return count() == 0; }

 private:
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  std::vector<char> cells_;
};

struct CsvOptions {
  char delimiter = ',';
  bool has_header = false;
  std::string missing_token;  // a field equal to this (after trimming) is missing
};

// Parsed matrix; missing cells hold 0 and are flagged in `missing`.
struct MatrixWithMask {
  DataMatrix matrix;
  MissingMask missing;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

inline MatrixWithMask parse_matrix_csv(std::istream& in, const CsvOptions& opts = {}) {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<std::size_t>> missing_cols;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool header_pending = opts.has_header;
  const std::string_view missing = detail::trim(opts.missing_token);

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = detail::split(line, opts.delimiter);
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()),
                       line_no);
    std::vector<double> row(width, 0.0);
    std::vector<std::size_t> miss;
    for (std::size_t j = 0; j < width; ++j) {
      const std::string_view f = detail::trim(fields[j]);
      if (f == missing) {
        miss.push_back(j);
        continue;
      }
      double v = 0.0;
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (!f.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (f.empty() || ec != std::errc() || ptr != last)
        throw ParseError("non-numeric field '" + std::string(f) + "' in column " + std::to_string(j + 1), line_no);
      if (!std::isfinite(v)) throw ParseError("non-finite value in column " + std::to_string(j + 1), line_no);
      row[j] = v;
    }
    rows.push_back(std::move(row));
    missing_cols.push_back(std::move(miss));
  }
  if (rows.empty()) throw ParseError("no data rows", line_no);

  const std::size_t n = rows.size();
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  MissingMask mask(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    for (std::size_t j : missing_cols[i]) mask.set(i, j);
  }
  return {DataMatrix(std::move(m)), std::move(mask)};
}

inline MatrixWithMask read_matrix_csv(const std::string& path, const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_matrix_csv(in, opts);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix_csv(std::ostream& out, const DataMatrix& x, char delimiter = ',') {
  for (std::size_t i = 0; i < x.n(); ++i) {
    for (std::size_t j = 0; j < x.p(); ++j) {
      if (j) out << delimiter;
      out << format_double(x(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const DataMatrix& x, char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_matrix_csv(out, x, delimiter);
  if (!out) throw IoError("write to '" + path + "' failed");
}

// Binary container: "SFPA", u32 version (1), u64 n, u64 p, then n * p
// little-endian IEEE-754 doubles in row-major order.
namespace binary {

inline constexpr char kMagic[4] = {'S', 'F', 'P', 'A'};
inline constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ParseError("truncated binary matrix");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace binary

inline void write_matrix_binary(std::ostream& out, const DataMatrix& x) {
  out.write(binary::kMagic, 4);
  binary::put_le<std::uint32_t>(out, binary::kVersion);
  binary::put_le<std::uint64_t>(out, x.n());
  binary::put_le<std::uint64_t>(out, x.p());
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t j = 0; j < x.p(); ++j) binary::put_le<double>(out, x(i, j));
}

inline DataMatrix read_matrix_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, binary::kMagic, 4) != 0) throw ParseError("bad magic bytes");
  const auto version = binary::get_le<std::uint32_t>(in);
  if (version != binary::kVersion) throw ParseError("unsupported binary version " + std::to_string(version));
  const auto n = binary::get_le<std::uint64_t>(in);
  const auto p = binary::get_le<std::uint64_t>(in);
  if (n == 0 || p == 0) throw ParseError("binary matrix has an empty dimension");
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < p; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = binary::get_le<double>(in);
  if (!m.allFinite()) throw ParseError("binary matrix contains non-finite values");
  return DataMatrix(std::move(m));
}

inline void write_matrix_binary(const std::string& path, const DataMatrix& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_matrix_binary(out, x);
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline DataMatrix read_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_matrix_binary(in);
}

// Reads either format, sniffing the magic bytes.
inline MatrixWithMask read_matrix(const std::string& path, const CsvOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  in.clear();
  in.seekg(0);
  if (in.gcount() == 4 && std::memcmp(magic, binary::kMagic, 4) == 0) {
    DataMatrix m = read_matrix_binary(in);
    MissingMask mask(m.n(), m.p());
    return {std::move(m), std::move(mask)};
  }
  return parse_matrix_csv(in, opts);
}

enum class PreprocessStep { center_rows, center_columns, scale_columns_unit_variance, impute_missing_zero };

inline const char* to_string(PreprocessStep s) {
  switch (s) {
    case PreprocessStep::center_rows:
      return "center_rows";
    case PreprocessStep::center_columns:
      return "center_columns";
    case PreprocessStep::scale_columns_unit_variance:
      return "scale_columns_unit_variance";
    default:
      return "impute_missing_zero";
  }
}

// Accepts a comma-separated list; '-' and '_' are interchangeable and
// "scale_columns" abbreviates the unit-variance step.
inline std::vector<PreprocessStep> parse_preprocess_steps(std::string_view text) {
  std::vector<PreprocessStep> out;
  if (detail::trim(text).empty() || detail::trim(text) == "none") return out;
  for (auto part : detail::split(text, ',')) {
    std::string name(detail::trim(part));
    std::replace(name.begin(), name.end(), '-', '_');
    if (name == "center_rows")
      out.push_back(PreprocessStep::center_rows);
    else if (name == "center_columns")
      out.push_back(PreprocessStep::center_columns);
    else if (name == "scale_columns" || name == "scale_columns_unit_variance")
      out.push_back(PreprocessStep::scale_columns_unit_variance);
    else if (name == "impute_missing_zero" || name == "impute")
      out.push_back(PreprocessStep::impute_missing_zero);
    else
      throw InputError("unknown preprocessing step '" + name + "'");
  }
  return out;
}

// The order narrated for real data: center rows, then normalize columns.
inline std::vector<PreprocessStep> default_preprocess() {
  return {PreprocessStep::impute_missing_zero, PreprocessStep::center_rows,
          PreprocessStep::scale_columns_unit_variance};
}

// Applies `steps` in order, except that zero-imputation of masked cells always
// happens first. Masked cells without an impute step are an error. Constant
// columns are left unscaled and reported through `warnings`.
inline DataMatrix apply_preprocess(const DataMatrix& x, const MissingMask& mask, std::span<const PreprocessStep> steps,
                                   std::vector<std::string>* warnings = nullptr) {
  Matrix a = x.values();
  const bool impute = std::find(steps.begin(), steps.end(), PreprocessStep::impute_missing_zero) != steps.end();
  if (mask.n() != 0 || mask.p() != 0) {
    if (mask.n() != x.n() || mask.p() != x.p()) throw InputError("missing mask shape mismatch");
    if (!mask.empty()) {
      if (!impute) throw InputError("input has missing values; add the impute_missing_zero step");
      for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.p(); ++j)
          if (mask(i, j)) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.0;
    }
  }
  for (PreprocessStep step : steps) {
    switch (step) {
      case PreprocessStep::impute_missing_zero:
        break;
      case PreprocessStep::center_rows:
        a.colwise() -= a.rowwise().mean();
        break;
      case PreprocessStep::center_columns:
        a.rowwise() -= a.colwise().mean();
        break;
      case PreprocessStep::scale_columns_unit_variance: {
        if (a.rows() < 2) throw InputError("column scaling needs at least two rows");
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
          const double mean = a.col(j).mean();
          const double var = (a.col(j).array() - mean).square().sum() / static_cast<double>(a.rows() - 1);
          if (!(var > 0.0)) {
            if (warnings) warnings->push_back("column " + std::to_string(j) + " has zero variance; left unscaled");
            continue;
          }
          a.col(j) /= std::sqrt(var);
        }
        break;
      }
    }
  }
  return DataMatrix(std::move(a));
}

inline DataMatrix apply_preprocess(const DataMatrix& x, std::span<const PreprocessStep> steps,
                                   std::vector<std::string>* warnings = nullptr) {
  return apply_preprocess(x, MissingMask(), steps, warnings);
}

}  // namespace sfpa

#pragma once

// Matrix Market reader/writer (real/integer fields; coordinate or array).

#include "fta/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

namespace fta::mm {

struct Header {
  bool coordinate = false;
  bool symmetric = false;
  bool skew = false;
};

using Matrix = std::variant<SpMat, Mat>;

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] inline void fail(const std::string& path, std::size_t line, std::size_t col, const std::string& msg) {
  throw ParseError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
}

inline Header parse_banner(const std::string& path, const std::string& line) {
  std::istringstream ss(line);
  std::string banner, object, format, field, symmetry;
  ss >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") fail(path, 1, 1, "missing %%MatrixMarket banner");
  if (lower(object) != "matrix") fail(path, 1, banner.size() + 2, "object must be 'matrix'");
  Header h;
  format = lower(format);
  if (format == "coordinate") {
    h.coordinate = true;
  } else if (format != "array") {
    fail(path, 1, line.find(format) + 1, "format must be coordinate or array");
  }
  field = lower(field);
  if (field != "real" && field != "integer" && field != "double") {
    fail(path, 1, line.find(field) + 1, "field must be real or integer");
  }
  symmetry = lower(symmetry);
  if (symmetry == "symmetric") {
    h.symmetric = true;
  } else if (symmetry == "skew-symmetric") {
    h.skew = true;
  } else if (symmetry != "general") {
    fail(path, 1, line.find(symmetry) + 1, "unsupported symmetry '" + symmetry + "'");
  }
  return h;
}

}  // namespace detail

inline Matrix read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) detail::fail(path, 1, 1, "empty file");
  const Header h = detail::parse_banner(path, line);

  // Skip comments and blank lines up to the size line.
  while (std::getline(in, line)) {
    ++lineno;
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '%') continue;
    break;
  }
  std::istringstream sz(line);
  long rows = -1, cols = -1, nnz = -1;
  sz >> rows >> cols;
  if (h.coordinate) sz >> nnz;
  if (!sz || rows < 0 || cols < 0 || (h.coordinate && nnz < 0)) {
    detail::fail(path, lineno, 1, "malformed size line");
  }

  auto next_entry = [&](std::istringstream& es) {
    while (std::getline(in, line)) {
      ++lineno;
      const auto p = line.find_first_not_of(" \t\r");
      if (p == std::string::npos || line[p] == '%') continue;
      es.clear();
      es.str(line);
      return true;
    }
    return false;
  };

  std::istringstream es;
  if (h.coordinate) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nnz) * (h.symmetric || h.skew ? 2 : 1));
    for (long k = 0; k < nnz; ++k) {
      if (!next_entry(es)) detail::fail(path, lineno, 1, "expected " + std::to_string(nnz) + " entries");
      long i = 0, j = 0;
      double v = 0.0;
      es >> i >> j >> v;
      if (!es) detail::fail(path, lineno, 1, "malformed entry");
      if (i < 1 || i > rows || j < 1 || j > cols) detail::fail(path, lineno, 1, "index out of range");
      trip.emplace_back(i - 1, j - 1, v);
      if ((h.symmetric || h.skew) && i != j) trip.emplace_back(j - 1, i - 1, h.skew ? -v : v);
    }
    SpMat A(rows, cols);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    return A;
  }

  Mat D = Mat::Zero(rows, cols);
  for (long j = 0; j < cols; ++j) {
    const long i0 = (h.symmetric || h.skew) ? j : 0;
    for (long i = i0; i < rows; ++i) {
      if (h.skew && i == j) continue;
      if (!next_entry(es)) detail::fail(path, lineno, 1, "too few array entries");
      double v = 0.0;
      es >> v;
      if (!es) detail::fail(path, lineno, 1, "malformed value");
      D(i, j) = v;
      if (h.symmetric) D(j, i) = v;
      if (h.skew) D(j, i) = -v;
    }
  }
  return D;
}

inline SpMat read_sparse(const std::string& path) {
  Matrix m = read(path);
  if (auto* s = std::get_if<SpMat>(&m)) return *s;
  SpMat s = std::get<Mat>(m).sparseView();
  s.makeCompressed();
  return s;
}

inline Mat read_dense(const std::string& path) {
  Matrix m = read(path);
  if (auto* d = std::get_if<Mat>(&m)) return *d;
  return Mat(std::get<SpMat>(m));
}

namespace detail {
inline void put(std::FILE* f, double v) { std::fprintf(f, "%.17g", v); }
}  // namespace detail

inline void write_dense(const std::string& path, const Mat& D) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot write " + path);
  std::fprintf(f, "%%%%MatrixMarket matrix array real general\n%ld %ld\n",
               static_cast<long>(D.rows()), static_cast<long>(D.cols()));
  for (Index j = 0; j < D.cols(); ++j) {
    for (Index i = 0; i < D.rows(); ++i) {
      detail::put(f, D(i, j));
      std::fputc('\n', f);
    }
  }
  if (std::fclose(f) != 0) throw IoError("error closing " + path);
}

inline void write_sparse(const std::string& path, const SpMat& A) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot write " + path);
  std::fprintf(f, "%%%%MatrixMarket matrix coordinate real general\n%ld %ld %ld\n",
               static_cast<long>(A.rows()), static_cast<long>(A.cols()), static_cast<long>(A.nonZeros()));
  for (Index j = 0; j < A.outerSize(); ++j) {
    for (SpMat::InnerIterator it(A, j); it; ++it) {
      std::fprintf(f, "%ld %ld ", static_cast<long>(it.row() + 1), static_cast<long>(it.col() + 1));
      detail::put(f, it.value());
      std::fputc('\n', f);
    }
  }
  if (std::fclose(f) != 0) throw IoError("error closing " + path);
}

}  // namespace fta::mm

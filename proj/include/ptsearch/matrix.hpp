#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptsearch {

#ifdef PTSEARCH_REAL32
using real = float;
#else
using real = double;
#endif

// Dense row-major matrix; the only tensor type the pipeline needs.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<real> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, real(0)) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
  }
  Matrix(int r, int c, std::vector<real> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != static_cast<std::size_t>(r) * c)
      throw std::invalid_argument("Matrix: data length does not match rows*cols");
  }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix full(int r, int c, real v) {
    Matrix m(r, c);
    std::fill(m.data.begin(), m.data.end(), v);
    return m;
  }

  real& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  real at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  real* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const real* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// out = a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a) + " * " + shape_str(b));
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const real* arow = a.row(i);
    real* orow = out.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const real aik = arow[k];
      if (aik == real(0)) continue;
      const real* brow = b.row(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

// c += a * b
inline void addmm(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw std::invalid_argument("addmm: shape mismatch");
  for (int i = 0; i < a.rows; ++i) {
    const real* arow = a.row(i);
    real* crow = c.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const real aik = arow[k];
      if (aik == real(0)) continue;
      const real* brow = b.row(k);
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

// c += a * b^T
inline void addmm_nt(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows)
    throw std::invalid_argument("addmm_nt: shape mismatch");
  for (int i = 0; i < a.rows; ++i) {
    const real* arow = a.row(i);
    real* crow = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const real* brow = b.row(j);
      real s = 0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      crow[j] += s;
    }
  }
}

// c += a^T * b
inline void addmm_tn(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
    throw std::invalid_argument("addmm_tn: shape mismatch");
  for (int k = 0; k < a.rows; ++k) {
    const real* arow = a.row(k);
    const real* brow = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      const real aki = arow[i];
      if (aki == real(0)) continue;
      real* crow = c.row(i);
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

inline bool all_finite(const Matrix& m) {
  for (real v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "max_abs_diff");
  double d = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    d = std::max(d, std::abs(double(a.data[i]) - double(b.data[i])));
  return d;
}

}  // namespace ptsearch

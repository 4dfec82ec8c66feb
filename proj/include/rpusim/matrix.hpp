#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rpusim {

/// Minimal dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double &operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix &o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

inline std::vector<double> matvec(const Matrix &m, const std::vector<double> &x) {
  if (x.size() != m.cols)
    throw std::invalid_argument("matvec: dimension mismatch");
  std::vector<double> y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double *row = &m.data[r * m.cols];
    for (std::size_t c = 0; c < m.cols; ++c)
      acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

inline std::vector<double> matvec_transposed(const Matrix &m, const std::vector<double> &d) {
  if (d.size() != m.rows)
    throw std::invalid_argument("matvec_transposed: dimension mismatch");
  std::vector<double> z(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double *row = &m.data[r * m.cols];
    const double dr = d[r];
    if (dr == 0.0)
      continue;
    for (std::size_t c = 0; c < m.cols; ++c)
      z[c] += row[c] * dr;
  }
  return z;
}

} // namespace rpusim

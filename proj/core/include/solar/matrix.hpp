#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace solar {

// Dense row-major double matrix. The single carrier type for histories,
// candidate sets, projection weights and gradients.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d)
      : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != rows * cols)
      throw std::invalid_argument("Matrix: data length " +
                                  std::to_string(data.size()) +
                                  " != " + shape_str());
  }

  double &operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double *row_ptr(std::size_t i) { return data.data() + i * cols; }
  const double *row_ptr(std::size_t i) const { return data.data() + i * cols; }

  bool empty() const { return rows == 0 || cols == 0; }
  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  static Matrix identity(std::size_t n);
  static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }
};

bool is_finite(const Matrix &a);

Matrix matmul(const Matrix &a, const Matrix &b);
Matrix transpose(const Matrix &a);
Matrix add(const Matrix &a, const Matrix &b);
Matrix sub(const Matrix &a, const Matrix &b);
Matrix scale(const Matrix &a, double s);
Matrix hadamard(const Matrix &a, const Matrix &b);

// a += s * b, in place.
void axpy(Matrix &a, double s, const Matrix &b);

double frobenius_norm(const Matrix &a);
double max_abs(const Matrix &a);
double dot(const Matrix &a, const Matrix &b);

// Row-wise softmax of scale * s: out[i][j] = exp(scale*s[i][j] - m_i) / sum_j.
// Each output row sums to 1.
Matrix softmax_rows(const Matrix &s, double scale);
void softmax_rows_inplace(Matrix &s, double scale);

// Gathers rows of `src` by index into a new matrix.
Matrix gather_rows(const Matrix &src, const std::vector<std::size_t> &idx);

}  // namespace solar

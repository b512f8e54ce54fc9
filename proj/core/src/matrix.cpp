#include "solar/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace solar {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool is_finite(const Matrix &a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

static void check_same_shape(const Matrix &a, const Matrix &b, const char *op) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dimensions disagree, A is " +
                                a.shape_str() + ", B is " + b.shape_str());
  Matrix c(a.rows, b.cols);
  // i-k-j order so the inner loop streams both B and C rows.
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double *arow = a.row_ptr(i);
    double *crow = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double *brow = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix &a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix &a, const Matrix &b) {
  check_same_shape(a, b, "add");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix sub(const Matrix &a, const Matrix &b) {
  check_same_shape(a, b, "sub");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix scale(const Matrix &a, double s) {
  Matrix c = a;
  for (double &v : c.data) v *= s;
  return c;
}

Matrix hadamard(const Matrix &a, const Matrix &b) {
  check_same_shape(a, b, "hadamard");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

void axpy(Matrix &a, double s, const Matrix &b) {
  check_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += s * b.data[i];
}

double frobenius_norm(const Matrix &a) {
  double acc = 0.0;
  for (double v : a.data) acc += v * v;
  return std::sqrt(acc);
}

double max_abs(const Matrix &a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::fabs(v));
  return m;
}

double dot(const Matrix &a, const Matrix &b) {
  check_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

Matrix softmax_rows(const Matrix &s, double scale) {
  Matrix p(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    const double *in = s.row_ptr(i);
    double *out = p.row_ptr(i);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.cols; ++j) m = std::max(m, scale * in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) {
      out[j] = std::exp(scale * in[j] - m);
      z += out[j];
    }
    for (std::size_t j = 0; j < s.cols; ++j) out[j] /= z;
  }
  return p;
}

void softmax_rows_inplace(Matrix &s, double scale) {
  for (std::size_t i = 0; i < s.rows; ++i) {
    double *row = s.row_ptr(i);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.cols; ++j) m = std::max(m, scale * row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) {
      row[j] = std::exp(scale * row[j] - m);
      z += row[j];
    }
    for (std::size_t j = 0; j < s.cols; ++j) row[j] /= z;
  }
}

Matrix gather_rows(const Matrix &src, const std::vector<std::size_t> &idx) {
  Matrix out(idx.size(), src.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= src.rows)
      throw std::out_of_range("gather_rows: row " + std::to_string(idx[i]) +
                              " out of range for " + src.shape_str());
    std::copy(src.row_ptr(idx[i]), src.row_ptr(idx[i]) + src.cols, out.row_ptr(i));
  }
  return out;
}

}  // namespace solar

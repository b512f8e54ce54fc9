#pragma once

#include <vector>

#include "solar/matrix.hpp"

namespace solar {

struct QrThin {
  Matrix q;            // n x k, orthonormal columns
  Matrix r;            // k x k, upper triangular, nonnegative diagonal
  int deficient_cols;  // columns whose pivot collapsed to zero
};

// Householder thin QR of an n x k matrix, n >= k. Zero-norm pivots are left
// as zero rows of R; the corresponding Q columns fall back to the orthonormal
// completion the reflectors produce, and the column is counted as deficient.
QrThin qr_thin(const Matrix &a);

struct SvdDense {
  Matrix u;               // n x k
  std::vector<double> s;  // k, descending, >= 0
  Matrix v;               // m x k
};

// Full (thin) SVD by one-sided Jacobi, k = min(n, m). Deterministic sign
// convention: the largest-magnitude entry of each right singular vector is
// made positive.
SvdDense svd_dense(const Matrix &a);

}  // namespace solar

#include <doctest.h>

#include "oracles.hpp"
#include "solar/decomp.hpp"
#include "solar/rng.hpp"

using namespace solar;

namespace {

double orthonormality_defect(const Matrix &q) {
  return max_abs(sub(matmul(transpose(q), q), Matrix::identity(q.cols)));
}

Matrix reconstruct(const SvdDense &f) {
  Matrix us = f.u;
  for (std::size_t i = 0; i < us.rows; ++i)
    for (std::size_t j = 0; j < us.cols; ++j) us(i, j) *= f.s[j];
  return matmul(us, transpose(f.v));
}

}  // namespace

TEST_SUITE_BEGIN("linalg");

TEST_CASE("qr of the 3-4-5 column") {
  Matrix a(2, 1);
  a(0, 0) = 3.0;
  a(1, 0) = 4.0;
  const QrThin qr = qr_thin(a);
  CHECK(qr.q(0, 0) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(qr.q(1, 0) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(qr.r(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(qr.deficient_cols == 0);
}

TEST_CASE("qr of an orthonormal matrix is the identity factorization") {
  Rng rng(2);
  const Matrix q0 = qr_thin(rng.gaussian_matrix(7, 3)).q;
  const QrThin qr = qr_thin(q0);
  CHECK(oracle::rel_fro(qr.q, q0) < 1e-13);
  CHECK(max_abs(sub(qr.r, Matrix::identity(3))) < 1e-13);
}

TEST_CASE("qr residuals over random seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Matrix a = rng.gaussian_matrix(20, 4);
    const QrThin qr = qr_thin(a);
    CHECK(orthonormality_defect(qr.q) <= 1e-10);
    CHECK(oracle::rel_fro(matmul(qr.q, qr.r), a) <= 1e-10);
    for (std::size_t i = 0; i < qr.r.rows; ++i) {
      CHECK(qr.r(i, i) >= 0.0);
      for (std::size_t j = 0; j < i; ++j) CHECK(qr.r(i, j) == 0.0);
    }
  }
}

TEST_CASE("qr flags zero-norm pivots and keeps Q orthonormal") {
  Rng rng(9);
  Matrix a = rng.gaussian_matrix(6, 3);
  for (std::size_t i = 0; i < 6; ++i) a(i, 1) = 2.0 * a(i, 0);  // dependent column
  const QrThin qr = qr_thin(a);
  CHECK(std::fabs(qr.r(1, 1)) <= 1e-12);
  CHECK(orthonormality_defect(qr.q) <= 1e-10);
  CHECK(oracle::rel_fro(matmul(qr.q, qr.r), a) <= 1e-10);

  // Exactly zero columns fall back to the canonical completion and are
  // counted.
  const QrThin zero = qr_thin(Matrix(4, 2));
  CHECK(zero.deficient_cols == 2);
  CHECK(orthonormality_defect(zero.q) <= 1e-12);

  Matrix b = rng.gaussian_matrix(5, 3);
  for (std::size_t i = 0; i < 5; ++i) b(i, 2) = 0.0;
  const QrThin one = qr_thin(b);
  CHECK(one.deficient_cols == 1);
  CHECK(orthonormality_defect(one.q) <= 1e-10);
}

TEST_CASE("svd of a diagonal matrix") {
  Matrix a(3, 3);
  a(0, 0) = 3.0;
  a(1, 1) = 2.0;
  a(2, 2) = 1.0;
  const SvdDense f = svd_dense(a);
  CHECK(f.s[0] == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(f.s[1] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(f.s[2] == doctest::Approx(1.0).epsilon(1e-13));
  // Sign convention resolves V to +identity columns.
  CHECK(max_abs(sub(f.v, Matrix::identity(3))) < 1e-13);
}

TEST_CASE("svd of a rank-1 matrix") {
  Rng rng(4);
  Matrix u = rng.gaussian_matrix(5, 1);
  Matrix v = rng.gaussian_matrix(6, 1);
  const double nu = frobenius_norm(u), nv = frobenius_norm(v);
  for (double &x : u.data) x /= nu;
  for (double &x : v.data) x /= nv;
  const Matrix a = scale(matmul(u, transpose(v)), 5.0);
  const SvdDense f = svd_dense(a);
  CHECK(f.s[0] == doctest::Approx(5.0).epsilon(1e-12));
  for (std::size_t j = 1; j < f.s.size(); ++j) CHECK(f.s[j] <= 1e-12);
  CHECK(oracle::rel_fro(reconstruct(f), a) <= 1e-12);
  CHECK(orthonormality_defect(f.u) <= 1e-9);
  CHECK(orthonormality_defect(f.v) <= 1e-12);
}

TEST_CASE("svd residuals on random rectangular matrices") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Matrix a = seed % 2 ? rng.gaussian_matrix(8, 6) : rng.gaussian_matrix(6, 8);
    const SvdDense f = svd_dense(a);
    CHECK(frobenius_norm(sub(reconstruct(f), a)) <= 1e-9 * frobenius_norm(a));
    CHECK(orthonormality_defect(f.u) <= 1e-10);
    CHECK(orthonormality_defect(f.v) <= 1e-10);
    for (std::size_t j = 1; j < f.s.size(); ++j) CHECK(f.s[j - 1] >= f.s[j]);
  }
}

TEST_CASE("singular values invariant under row permutation and rotations") {
  Rng rng(31);
  const Matrix a = rng.gaussian_matrix(7, 5);
  const SvdDense base = svd_dense(a);

  Matrix perm(7, 7);
  const std::size_t order[7] = {3, 0, 6, 1, 5, 2, 4};
  for (std::size_t i = 0; i < 7; ++i) perm(i, order[i]) = 1.0;
  const SvdDense permuted = svd_dense(matmul(perm, a));

  const Matrix q_l = qr_thin(rng.gaussian_matrix(7, 7)).q;
  const Matrix q_r = qr_thin(rng.gaussian_matrix(5, 5)).q;
  const SvdDense rotated = svd_dense(matmul(q_l, matmul(a, transpose(q_r))));

  for (std::size_t j = 0; j < base.s.size(); ++j) {
    CHECK(permuted.s[j] == doctest::Approx(base.s[j]).epsilon(1e-9));
    CHECK(rotated.s[j] == doctest::Approx(base.s[j]).epsilon(1e-9));
  }
}

TEST_CASE("svd of the zero matrix completes to canonical factors") {
  const SvdDense f = svd_dense(Matrix(4, 3));
  for (double s : f.s) CHECK(s == 0.0);
  CHECK(max_abs(sub(f.v, Matrix::identity(3))) == 0.0);
  CHECK(orthonormality_defect(f.u) <= 1e-15);
}

TEST_SUITE_END();

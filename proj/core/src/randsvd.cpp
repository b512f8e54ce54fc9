#include "solar/randsvd.hpp"

#include <algorithm>
#include <cmath>

#include "solar/decomp.hpp"

namespace solar {

SvdFactors randomized_svd(const Matrix &h, std::size_t rank, int n_iter, Rng &rng,
                          bool stabilized) {
  const std::size_t n = h.rows, d = h.cols;
  if (rank < 1 || rank > std::min(n, d))
    throw std::invalid_argument("randomized_svd: rank " + std::to_string(rank) +
                                " out of range for " + h.shape_str());
  if (n_iter < 0) throw std::invalid_argument("randomized_svd: n_iter < 0");
  if (!is_finite(h)) throw std::invalid_argument("randomized_svd: non-finite input");

  Matrix omega = rng.gaussian_matrix(d, rank);
  for (int it = 0; it < n_iter; ++it) {
    omega = matmul(transpose(h), matmul(h, omega));
    if (stabilized) omega = qr_thin(omega).q;
  }

  const Matrix q = qr_thin(matmul(h, omega)).q;  // n x r
  const SvdDense small = svd_dense(matmul(transpose(q), h));

  SvdFactors f;
  f.rank = rank;
  f.n_iter = n_iter;
  f.s.assign(small.s.begin(), small.s.begin() + rank);
  f.v = Matrix(d, rank);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < rank; ++j) f.v(i, j) = small.v(i, j);
  f.degenerate = f.s[0] == 0.0;
  return f;
}

SvdFactors recover_left_vectors(const Matrix &h, const SvdFactors &f,
                                double eps_rel) {
  if (h.cols != f.v.rows)
    throw std::invalid_argument("recover_left_vectors: H " + h.shape_str() +
                                " does not match V " + f.v.shape_str());
  std::size_t keep = 0;
  const double cutoff = f.s.empty() ? 0.0 : eps_rel * f.s[0];
  while (keep < f.rank && f.s[keep] > cutoff && f.s[keep] > 0.0) ++keep;

  SvdFactors out;
  out.n_iter = f.n_iter;
  out.degenerate = f.degenerate;
  out.rank = keep;
  out.s.assign(f.s.begin(), f.s.begin() + keep);
  out.v = Matrix(h.cols, keep);
  for (std::size_t i = 0; i < h.cols; ++i)
    for (std::size_t j = 0; j < keep; ++j) out.v(i, j) = f.v(i, j);

  const Matrix hv = matmul(h, out.v);  // n x keep
  out.u = Matrix(h.rows, keep);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < keep; ++j) out.u(i, j) = hv(i, j) / out.s[j];
  return out;
}

}  // namespace solar

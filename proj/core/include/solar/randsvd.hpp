#pragma once

#include <vector>

#include "solar/matrix.hpp"
#include "solar/rng.hpp"

namespace solar {

// Rank-r truncated factorization of a history matrix H (n x d):
// H ~= U diag(s) V^T. The forward pass produces only (s, V); U is
// reconstructed on demand for the backward pass.
struct SvdFactors {
  std::vector<double> s;  // descending, >= 0
  Matrix v;               // d x r, orthonormal columns
  Matrix u;               // n x r when recovered, otherwise empty
  std::size_t rank = 0;
  int n_iter = 0;
  bool degenerate = false;  // all-zero input

  bool has_u() const { return !u.empty(); }
};

// Randomized truncated SVD with power iteration:
//   Omega ~ N(0,1)^{d x r}
//   repeat n_iter times: Omega <- H^T (H Omega)
//   Q <- thin-QR basis of (H Omega)
//   small SVD of Q^T H gives s and the right vectors.
// With stabilized=true a QR re-orthonormalization is inserted after each
// power step; the raw recurrence otherwise loses precision for large n_iter.
// Cost is O(n * d * r) per power step.
SvdFactors randomized_svd(const Matrix &h, std::size_t rank, int n_iter, Rng &rng,
                          bool stabilized = false);

// Fills in U = H V Sigma^{-1}. Columns with s_i < eps_rel * s_0 are dropped
// and the rank reduced accordingly.
SvdFactors recover_left_vectors(const Matrix &h, const SvdFactors &f,
                                double eps_rel = 1e-9);

}  // namespace solar

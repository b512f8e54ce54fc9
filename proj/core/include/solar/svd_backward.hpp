#pragma once

#include <vector>

#include "solar/attention.hpp"
#include "solar/matrix.hpp"
#include "solar/randsvd.hpp"

namespace solar {

// Default relative clamp (against sigma_0^2) for near-degenerate singular
// value pairs in F. Clamped pairs contribute zero, which keeps the gradient
// finite and acts as a spectral regularizer near repeated values.
inline constexpr double kDefaultClampEps = 1e-9;

struct FMatrix {
  Matrix f;          // r x r, F_ij = 1/(s_i^2 - s_j^2) off-diagonal, 0 on diagonal
  int clamped_pairs = 0;
};

FMatrix build_F(const std::vector<double> &s, double clamp_eps = kDefaultClampEps);

// Upstream gradients for the factorization, expressed on (Sigma, V).
struct SvdGrads {
  std::vector<double> bar_sigma;  // r
  Matrix bar_v;                   // d x r
  FMatrix f;
};

// Converts the gradient of P = Sigma V^T (the pipeline's native upstream,
// r x d) into factor gradients: bar_V = G_P^T Sigma, bar_sigma_i = (G_P V)_ii.
SvdGrads chain_to_factors(const Matrix &g_p, const SvdFactors &f,
                          double clamp_eps = kDefaultClampEps);

// dL/dH = U [ diag(bar_sigma) + 2 Sigma sym(F o (bar_V^T V)) ] V^T.
// The result lives in span(U) span(V)^T; the component of the true gradient
// that rotates V into its orthogonal complement is dropped (see bias_term).
// Requires f.u (recover_left_vectors).
Matrix svd_backward_truncated(const SvdFactors &f, const SvdGrads &g);

// Reference gradient through the full SVD of H with bar_U == 0 and zero
// upstream on the complement block: includes the cross blocks the truncated
// formula omits. Oracle only; cost is a dense Jacobi SVD of H.
Matrix svd_backward_full_oracle(const Matrix &h, const SvdGrads &g, std::size_t rank);

struct BiasTerm {
  Matrix e;      // U Sigma^{-1} bar_V^T (I - V V^T)
  double bound;  // ||bar_V^T (I - V V^T)||_F / sigma_r
};

// First-order estimate of the gradient the truncation drops, with its norm
// bound. Undefined when sigma_r has collapsed.
BiasTerm bias_term(const SvdFactors &f, const SvdGrads &g,
                   double sigma_floor_rel = 1e-12);

// Parameter gradients of one attention block.
struct AttnGrads {
  Matrix h, c, w_q, w_k, w_v;
  int clamped_pairs = 0;
};

// First stage of the svd-attention backward: exact backprop down to the
// factorization boundary. Fills the C and W blocks of `grads` and returns
// the gradient of P = Sigma V^T.
Matrix pipeline_upstream_gp(const AttnOutput &fwd, const Matrix &g_out,
                            AttnGrads &grads);

// Backward through the cached svd-attention forward (either softmax mode).
// The H-gradient routes through chain_to_factors -> svd_backward_truncated;
// all other blocks are exact.
AttnGrads pipeline_backward(const AttnOutput &fwd, const Matrix &g_out,
                            double clamp_eps = kDefaultClampEps);

// Backward through cached softmax/linear attention (exact everywhere).
AttnGrads attn_backward_standard(const AttnOutput &fwd, const Matrix &g_out);

// One row of the gradient-suite report.
struct GradReport {
  std::string block;
  double max_rel_err = 0.0;
  int clamped_pairs = 0;
  bool pass = false;
};

}  // namespace solar

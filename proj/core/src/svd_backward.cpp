#include "solar/svd_backward.hpp"

#include <cmath>

#include "solar/decomp.hpp"

namespace solar {

FMatrix build_F(const std::vector<double> &s, double clamp_eps) {
  const std::size_t r = s.size();
  FMatrix out;
  out.f = Matrix(r, r);
  const double top = r == 0 ? 0.0 : s[0] * s[0];
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      const double denom = s[i] * s[i] - s[j] * s[j];
      if (denom == 0.0 || std::fabs(denom) < clamp_eps * top) {
        ++out.clamped_pairs;
        continue;
      }
      out.f(i, j) = 1.0 / denom;
      out.f(j, i) = -out.f(i, j);
    }
  }
  return out;
}

SvdGrads chain_to_factors(const Matrix &g_p, const SvdFactors &f,
                          double clamp_eps) {
  const std::size_t r = f.rank, d = f.v.rows;
  if (g_p.rows != r || g_p.cols != d)
    throw std::invalid_argument("chain_to_factors: G_P " + g_p.shape_str() +
                                " does not match rank " + std::to_string(r) +
                                ", d " + std::to_string(d));
  SvdGrads g;
  g.bar_v = Matrix(d, r);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = 0; i < r; ++i) g.bar_v(j, i) = g_p(i, j) * f.s[i];
  g.bar_sigma.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += g_p(i, j) * f.v(j, i);
    g.bar_sigma[i] = acc;
  }
  g.f = build_F(f.s, clamp_eps);
  return g;
}

namespace {

// inner = diag(bar_sigma) + 2 Sigma sym(F o (bar_V^T V)); entrywise this is
// inner_ij = s_i F_ij ((V^T bar_V)_ji - (V^T bar_V)_ij) off the diagonal.
Matrix inner_gradient(const std::vector<double> &s, const Matrix &v,
                      const Matrix &bar_v, const std::vector<double> &bar_sigma,
                      const Matrix &f) {
  const std::size_t r = s.size();
  const Matrix m = matmul(transpose(bar_v), v);  // r x r
  Matrix inner(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    inner(i, i) = bar_sigma[i];
    for (std::size_t j = 0; j < r; ++j) {
      if (i == j) continue;
      inner(i, j) = s[i] * f(i, j) * (m(i, j) - m(j, i));
    }
  }
  return inner;
}

}  // namespace

Matrix svd_backward_truncated(const SvdFactors &f, const SvdGrads &g) {
  if (!f.has_u())
    throw std::invalid_argument(
        "svd_backward_truncated: factors lack U; call recover_left_vectors first");
  const Matrix inner = inner_gradient(f.s, f.v, g.bar_v, g.bar_sigma, g.f.f);
  return matmul(f.u, matmul(inner, transpose(f.v)));
}

Matrix svd_backward_full_oracle(const Matrix &h, const SvdGrads &g,
                                std::size_t rank) {
  const SvdDense full = svd_dense(h);
  const std::size_t k = full.s.size(), d = h.cols;
  if (rank > k)
    throw std::invalid_argument("svd_backward_full_oracle: rank exceeds min dim");

  // Upstream on the complement block is zero by construction.
  Matrix bar_v_full(d, k);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < rank; ++j) bar_v_full(i, j) = g.bar_v(i, j);

  const Matrix m = matmul(transpose(bar_v_full), full.v);  // k x k
  Matrix inner(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    inner(i, i) = i < rank ? g.bar_sigma[i] : 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double num = m(i, j) - m(j, i);
      if (num == 0.0) continue;
      const double denom = full.s[i] * full.s[i] - full.s[j] * full.s[j];
      if (denom == 0.0) continue;
      inner(i, j) = full.s[i] * num / denom;
    }
  }
  return matmul(full.u, matmul(inner, transpose(full.v)));
}

BiasTerm bias_term(const SvdFactors &f, const SvdGrads &g, double sigma_floor_rel) {
  if (!f.has_u())
    throw std::invalid_argument("bias_term: factors lack U");
  const std::size_t r = f.rank, d = f.v.rows;
  const double sigma_r = f.s[r - 1];
  if (sigma_r <= 0.0 || sigma_r < sigma_floor_rel * f.s[0])
    throw std::invalid_argument("bias_term: sigma_r collapsed, bias undefined");

  // bar_V^T (I - V V^T), r x d.
  Matrix bvt = transpose(g.bar_v);
  const Matrix bvt_v = matmul(bvt, f.v);  // r x r
  Matrix orth = sub(bvt, matmul(bvt_v, transpose(f.v)));

  BiasTerm out;
  out.bound = frobenius_norm(orth) / sigma_r;
  Matrix scaled = orth;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < d; ++j) scaled(i, j) /= f.s[i];
  out.e = matmul(f.u, scaled);
  return out;
}

Matrix pipeline_upstream_gp(const AttnOutput &fwd, const Matrix &g_out,
                            AttnGrads &grads) {
  if (!fwd.has_cache)
    throw std::invalid_argument("pipeline_backward: forward ran without cache");
  const AttnCache &cc = fwd.cache;
  if (cc.variant != AttnVariant::kSvd)
    throw std::invalid_argument("pipeline_backward: cache is from the " +
                                std::string(attn_variant_name(cc.variant)) +
                                " variant, expected svd");
  if (g_out.rows != fwd.out.rows || g_out.cols != fwd.out.cols)
    throw std::invalid_argument("pipeline_backward: upstream shape " +
                                g_out.shape_str() + " != output shape " +
                                fwd.out.shape_str());

  // out = W Value_r with W = probs (softmax) or raw scores.
  const Matrix &weights = cc.apply_softmax ? cc.probs : cc.scores;
  Matrix d_value_r = matmul(transpose(weights), g_out);  // r x d
  Matrix t = matmul(g_out, transpose(cc.value));         // N_C x r
  Matrix d_scores(t.rows, t.cols);
  if (cc.apply_softmax) {
    for (std::size_t i = 0; i < t.rows; ++i) {
      double row_dot = 0.0;
      for (std::size_t j = 0; j < t.cols; ++j) row_dot += t(i, j) * cc.probs(i, j);
      for (std::size_t j = 0; j < t.cols; ++j)
        d_scores(i, j) = cc.scale * cc.probs(i, j) * (t(i, j) - row_dot);
    }
  } else {
    d_scores = std::move(t);
  }

  Matrix d_query = matmul(d_scores, cc.key);               // N_C x d
  Matrix d_key_r = matmul(transpose(d_scores), cc.query);  // r x d

  grads.c = matmul(d_query, transpose(cc.w_q));
  grads.w_q = matmul(transpose(cc.c), d_query);

  // P = Sigma V^T from the cached factors.
  const SvdFactors &f0 = cc.factors;
  Matrix p(f0.rank, cc.h.cols);
  for (std::size_t i = 0; i < f0.rank; ++i)
    for (std::size_t j = 0; j < cc.h.cols; ++j) p(i, j) = f0.s[i] * f0.v(j, i);
  grads.w_k = matmul(transpose(p), d_key_r);
  grads.w_v = matmul(transpose(p), d_value_r);

  Matrix g_p = matmul(d_key_r, transpose(cc.w_k));
  axpy(g_p, 1.0, matmul(d_value_r, transpose(cc.w_v)));
  return g_p;
}

AttnGrads pipeline_backward(const AttnOutput &fwd, const Matrix &g_out,
                            double clamp_eps) {
  AttnGrads grads;
  Matrix g_p = pipeline_upstream_gp(fwd, g_out, grads);

  // Left vectors are recovered here rather than stored by the forward pass.
  const AttnCache &cc = fwd.cache;
  SvdFactors f = recover_left_vectors(cc.h, cc.factors);
  if (f.rank < cc.factors.rank) {
    Matrix g_p_cut(f.rank, g_p.cols);
    for (std::size_t i = 0; i < f.rank; ++i)
      for (std::size_t j = 0; j < g_p.cols; ++j) g_p_cut(i, j) = g_p(i, j);
    g_p = std::move(g_p_cut);
  }
  if (f.rank == 0) {
    grads.h = Matrix(cc.h.rows, cc.h.cols);
    return grads;
  }
  SvdGrads g = chain_to_factors(g_p, f, clamp_eps);
  grads.clamped_pairs = g.f.clamped_pairs;
  grads.h = svd_backward_truncated(f, g);
  return grads;
}

AttnGrads attn_backward_standard(const AttnOutput &fwd, const Matrix &g_out) {
  if (!fwd.has_cache)
    throw std::invalid_argument("attn_backward_standard: forward ran without cache");
  const AttnCache &cc = fwd.cache;
  if (cc.variant == AttnVariant::kSvd)
    throw std::invalid_argument("attn_backward_standard: use pipeline_backward for svd");
  if (cc.h.empty())
    throw std::invalid_argument("attn_backward_standard: cache lacks projection inputs");

  Matrix d_query, d_key, d_value;
  if (cc.variant == AttnVariant::kSoftmax) {
    d_value = matmul(transpose(cc.probs), g_out);
    Matrix t = matmul(g_out, transpose(cc.value));  // N_C x N_L
    Matrix d_scores(t.rows, t.cols);
    for (std::size_t i = 0; i < t.rows; ++i) {
      double row_dot = 0.0;
      for (std::size_t j = 0; j < t.cols; ++j) row_dot += t(i, j) * cc.probs(i, j);
      for (std::size_t j = 0; j < t.cols; ++j)
        d_scores(i, j) = cc.scale * cc.probs(i, j) * (t(i, j) - row_dot);
    }
    d_query = matmul(d_scores, cc.key);
    d_key = matmul(transpose(d_scores), cc.query);
  } else {
    // out = Q (K^T V)
    const Matrix ktv = matmul(transpose(cc.key), cc.value);
    d_query = matmul(g_out, transpose(ktv));
    const Matrix d_ktv = matmul(transpose(cc.query), g_out);  // d x d
    d_key = matmul(cc.value, transpose(d_ktv));
    d_value = matmul(cc.key, d_ktv);
  }

  AttnGrads grads;
  grads.c = matmul(d_query, transpose(cc.w_q));
  grads.w_q = matmul(transpose(cc.c), d_query);
  grads.h = matmul(d_key, transpose(cc.w_k));
  axpy(grads.h, 1.0, matmul(d_value, transpose(cc.w_v)));
  grads.w_k = matmul(transpose(cc.h), d_key);
  grads.w_v = matmul(transpose(cc.h), d_value);
  return grads;
}

}  // namespace solar

#include "solar/attention.hpp"

#include <cmath>

namespace solar {

AttnVariant attn_variant_from_string(const std::string &name) {
  if (name == "softmax") return AttnVariant::kSoftmax;
  if (name == "linear") return AttnVariant::kLinear;
  if (name == "svd") return AttnVariant::kSvd;
  throw std::invalid_argument("unknown attention variant: " + name);
}

const char *attn_variant_name(AttnVariant v) {
  switch (v) {
    case AttnVariant::kSoftmax: return "softmax";
    case AttnVariant::kLinear: return "linear";
    case AttnVariant::kSvd: return "svd";
  }
  return "?";
}

double AttnConfig::effective_scale(std::size_t d) const {
  return scale > 0.0 ? scale : 1.0 / std::sqrt(static_cast<double>(d));
}

Projections project(const Matrix &h, const Matrix &c, const Matrix &w_q,
                    const Matrix &w_k, const Matrix &w_v) {
  if (h.cols != w_k.rows || h.cols != w_v.rows || c.cols != w_q.rows ||
      h.cols != c.cols)
    throw std::invalid_argument("project: shape mismatch, H " + h.shape_str() +
                                ", C " + c.shape_str() + ", W_Q " +
                                w_q.shape_str());
  return Projections{matmul(c, w_q), matmul(h, w_k), matmul(h, w_v)};
}

AttnOutput attn_softmax(const Matrix &query, const Matrix &key,
                        const Matrix &value, double scale, bool keep_cache) {
  if (query.cols != key.cols || key.rows != value.rows)
    throw std::invalid_argument("attn_softmax: shape mismatch, Q " +
                                query.shape_str() + ", K " + key.shape_str() +
                                ", V " + value.shape_str());
  Matrix scores = matmul(query, transpose(key));
  AttnOutput out;
  if (keep_cache) {
    Matrix probs = softmax_rows(scores, scale);
    out.out = matmul(probs, value);
    out.has_cache = true;
    out.cache.variant = AttnVariant::kSoftmax;
    out.cache.apply_softmax = true;
    out.cache.scale = scale;
    out.cache.query = query;
    out.cache.key = key;
    out.cache.value = value;
    out.cache.scores = std::move(scores);
    out.cache.probs = std::move(probs);
  } else {
    softmax_rows_inplace(scores, scale);
    out.out = matmul(scores, value);
  }
  return out;
}

AttnOutput attn_linear(const Matrix &query, const Matrix &key,
                       const Matrix &value, bool keep_cache) {
  if (query.cols != key.cols || key.rows != value.rows)
    throw std::invalid_argument("attn_linear: shape mismatch, Q " +
                                query.shape_str() + ", K " + key.shape_str() +
                                ", V " + value.shape_str());
  AttnOutput out;
  out.out = matmul(query, matmul(transpose(key), value));
  if (keep_cache) {
    out.has_cache = true;
    out.cache.variant = AttnVariant::kLinear;
    out.cache.apply_softmax = false;
    out.cache.query = query;
    out.cache.key = key;
    out.cache.value = value;
  }
  return out;
}

AttnOutput attn_svd(const Matrix &h, const Matrix &c, const Matrix &w_q,
                    const Matrix &w_k, const Matrix &w_v, const AttnConfig &cfg) {
  if (cfg.rank > std::min(h.rows, h.cols))
    throw std::invalid_argument("attn_svd: rank " + std::to_string(cfg.rank) +
                                " exceeds min dim of H " + h.shape_str());
  const double scale = cfg.effective_scale(h.cols);

  Rng rng(cfg.seed);
  SvdFactors f = randomized_svd(h, cfg.rank, cfg.n_iter, rng, cfg.stabilized);

  // (V Sigma)^T = Sigma V^T, r x d.
  Matrix p(cfg.rank, h.cols);
  for (std::size_t i = 0; i < cfg.rank; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) p(i, j) = f.s[i] * f.v(j, i);

  Matrix query = matmul(c, w_q);
  Matrix key_r = matmul(p, w_k);
  Matrix value_r = matmul(p, w_v);
  Matrix scores = matmul(query, transpose(key_r));  // N_C x r

  AttnOutput out;
  out.degenerate = f.degenerate;
  if (cfg.apply_softmax) {
    Matrix probs = softmax_rows(scores, scale);
    out.out = matmul(probs, value_r);
    if (cfg.keep_cache) out.cache.probs = std::move(probs);
  } else {
    out.out = matmul(scores, value_r);
  }
  if (cfg.keep_cache) {
    out.has_cache = true;
    out.cache.variant = AttnVariant::kSvd;
    out.cache.apply_softmax = cfg.apply_softmax;
    out.cache.scale = scale;
    out.cache.query = std::move(query);
    out.cache.key = std::move(key_r);
    out.cache.value = std::move(value_r);
    out.cache.scores = std::move(scores);
    out.cache.factors = std::move(f);
    out.cache.h = h;
    out.cache.c = c;
    out.cache.w_q = w_q;
    out.cache.w_k = w_k;
    out.cache.w_v = w_v;
  }
  return out;
}

AttnOutput attn_forward(const Matrix &h, const Matrix &c, const Matrix &w_q,
                        const Matrix &w_k, const Matrix &w_v,
                        const AttnConfig &cfg) {
  if (cfg.variant == AttnVariant::kSvd) return attn_svd(h, c, w_q, w_k, w_v, cfg);
  Projections pr = project(h, c, w_q, w_k, w_v);
  const double scale = cfg.effective_scale(h.cols);
  AttnOutput out = cfg.variant == AttnVariant::kSoftmax
                       ? attn_softmax(pr.query, pr.key, pr.value, scale, cfg.keep_cache)
                       : attn_linear(pr.query, pr.key, pr.value, cfg.keep_cache);
  if (out.has_cache) {
    out.cache.h = h;
    out.cache.c = c;
    out.cache.w_q = w_q;
    out.cache.w_k = w_k;
    out.cache.w_v = w_v;
  }
  return out;
}

}  // namespace solar

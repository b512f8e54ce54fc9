#pragma once

#include <cstdint>

#include "solar/matrix.hpp"
#include "solar/randsvd.hpp"

namespace solar {

enum class AttnVariant { kSoftmax, kLinear, kSvd };

AttnVariant attn_variant_from_string(const std::string &name);
const char *attn_variant_name(AttnVariant v);

struct AttnConfig {
  AttnVariant variant = AttnVariant::kSvd;
  std::size_t rank = 8;       // svd only
  int n_iter = 4;             // power iterations for the factorization
  bool apply_softmax = true;  // svd ablation toggle
  double scale = 0.0;         // 0 means 1/sqrt(d)
  std::uint64_t seed = 1;     // sketch seed for the factorization
  bool stabilized = false;    // re-orthonormalize between power steps
  bool keep_cache = true;     // benchmarks drop the backward cache

  double effective_scale(std::size_t d) const;
};

struct Projections {
  Matrix query;  // N_C x d
  Matrix key;    // N_L x d
  Matrix value;  // N_L x d
};

// Backward-pass intermediates. For the svd variant key/value hold the rank-r
// projections (r x d) and factors carries (s, V).
struct AttnCache {
  AttnVariant variant = AttnVariant::kSoftmax;
  bool apply_softmax = true;
  double scale = 1.0;
  Matrix query;
  Matrix key;
  Matrix value;
  Matrix scores;  // pre-softmax logits
  Matrix probs;   // row-stochastic weights when softmax applied
  SvdFactors factors;
  Matrix h, c, w_q, w_k, w_v;  // svd variant inputs, needed for the chain rule
};

struct AttnOutput {
  Matrix out;  // N_C x d
  bool degenerate = false;
  bool has_cache = false;
  AttnCache cache;
};

Projections project(const Matrix &h, const Matrix &c, const Matrix &w_q,
                    const Matrix &w_k, const Matrix &w_v);

// softmax_rows(Q K^T, scale) V -- O(N_C * N_L * d).
AttnOutput attn_softmax(const Matrix &query, const Matrix &key,
                        const Matrix &value, double scale,
                        bool keep_cache = true);

// Q (K^T V) -- O((N_C + N_L) d^2); no normalization.
AttnOutput attn_linear(const Matrix &query, const Matrix &key,
                       const Matrix &value, bool keep_cache = true);

// Rank-r path: Key_r = (V Sigma)^T W_K, Value_r = (V Sigma)^T W_V,
// out = [softmax_rows(Q Key_r^T, scale)] Value_r -- O((N_L + N_C) d r).
AttnOutput attn_svd(const Matrix &h, const Matrix &c, const Matrix &w_q,
                    const Matrix &w_k, const Matrix &w_v, const AttnConfig &cfg);

// Dispatch on cfg.variant over projected inputs.
AttnOutput attn_forward(const Matrix &h, const Matrix &c, const Matrix &w_q,
                        const Matrix &w_k, const Matrix &w_v,
                        const AttnConfig &cfg);

}  // namespace solar

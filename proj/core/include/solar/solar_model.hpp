#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "solar/attention.hpp"
#include "solar/datagen.hpp"
#include "solar/matrix.hpp"
#include "solar/svd_backward.hpp"

namespace solar {

// Desk-scale set-wise ranker: shared item embeddings, an attention block over
// the user history queried by the candidates, a softmax self-attention block
// over the candidate set, residual-added onto the candidate embeddings, and
// a linear scoring head.
struct SolarParams {
  Matrix embeddings;  // vocab x d
  Matrix w_q, w_k, w_v;     // history block
  Matrix w_q2, w_k2, w_v2;  // candidate-set block
  Matrix head;              // d x 1
  AttnConfig attn;          // history block variant/rank/seed
  bool use_history = true;
  bool use_candidates = true;

  std::size_t dim() const { return embeddings.cols; }
};

SolarParams init_params(std::size_t vocab, std::size_t dim, const AttnConfig &attn,
                        std::uint64_t seed, bool use_history = true,
                        bool use_candidates = true);

struct ForwardCache {
  Matrix h_emb;  // N_L x d
  Matrix c_emb;  // m x d
  Matrix z;      // m x d, representation fed to the head
  AttnOutput hist;
  AttnOutput cand;
};

std::vector<double> forward_scores(const SolarParams &params,
                                   const RankingInstance &inst,
                                   ForwardCache *cache = nullptr);

struct ModelGrads {
  Matrix embeddings;
  Matrix w_q, w_k, w_v;
  Matrix w_q2, w_k2, w_v2;
  Matrix head;
};

ModelGrads zero_grads(const SolarParams &params);

// Backprop of d_scores through the cached forward, accumulated into grads.
void backward_scores(const SolarParams &params, const RankingInstance &inst,
                     const ForwardCache &cache, const std::vector<double> &d_scores,
                     ModelGrads &grads);

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d scores
};

// Average negative log-likelihood of the positive items:
// -(1/k) sum_{i in P} s_i + log sum_j exp(s_j); gradient pi - (1/k) 1[P].
LossValue listwise_loss(const std::vector<double> &scores,
                        const std::vector<std::size_t> &positives);

LossValue pointwise_bce_loss(const std::vector<double> &scores,
                             const std::vector<int> &labels);

LossValue pairwise_bce_loss(const std::vector<double> &scores,
                            const std::vector<int> &labels);

enum class LossKind { kListwise, kPointwiseBce, kPairwiseBce };
LossKind loss_kind_from_string(const std::string &name);

struct TrainConfig {
  double lr = 0.05;
  double momentum = 0.9;
  int epochs = 20;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::kListwise;
  // Treat the embedding table as fixed input features; only attention
  // weights and the head train.
  bool freeze_embeddings = false;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double auc = 0.0;
  double uauc = 0.0;
  double risk = 0.0;
};

struct TrainResult {
  SolarParams params;
  std::vector<EpochMetrics> history;
  std::size_t skipped_instances = 0;  // no positive (or no negative) labels
  bool diverged = false;
};

// Deterministic SGD with momentum over seeded shuffles. On a non-finite loss
// the last completed epoch's parameters are restored and training stops.
TrainResult train(const SolarParams &params, const std::vector<RankingInstance> &data,
                  const TrainConfig &cfg);

EpochMetrics evaluate(const SolarParams &params,
                      const std::vector<RankingInstance> &data, LossKind loss_kind);

// Mean pairwise cosine between rows, the representation-correlation measure.
double mean_pairwise_cosine(const Matrix &rows);

}  // namespace solar

#include "solar/solar_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "solar/metrics.hpp"
#include "solar/rng.hpp"

namespace solar {

SolarParams init_params(std::size_t vocab, std::size_t dim, const AttnConfig &attn,
                        std::uint64_t seed, bool use_history, bool use_candidates) {
  Rng rng(seed);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(dim));
  SolarParams p;
  p.embeddings = scale(rng.gaussian_matrix(vocab, dim), w_scale);
  p.w_q = scale(rng.gaussian_matrix(dim, dim), w_scale);
  p.w_k = scale(rng.gaussian_matrix(dim, dim), w_scale);
  p.w_v = scale(rng.gaussian_matrix(dim, dim), w_scale);
  p.w_q2 = scale(rng.gaussian_matrix(dim, dim), w_scale);
  p.w_k2 = scale(rng.gaussian_matrix(dim, dim), w_scale);
  p.w_v2 = scale(rng.gaussian_matrix(dim, dim), w_scale);
  p.head = scale(rng.gaussian_matrix(dim, 1), w_scale);
  p.attn = attn;
  p.use_history = use_history;
  p.use_candidates = use_candidates;
  return p;
}

std::vector<double> forward_scores(const SolarParams &params,
                                   const RankingInstance &inst,
                                   ForwardCache *cache) {
  for (std::size_t id : inst.history)
    if (id >= params.embeddings.rows)
      throw std::out_of_range("forward_scores: history id out of vocab");
  for (std::size_t id : inst.candidates)
    if (id >= params.embeddings.rows)
      throw std::out_of_range("forward_scores: candidate id out of vocab");

  const Matrix c_emb = gather_rows(params.embeddings, inst.candidates);
  Matrix z = c_emb;

  ForwardCache local;
  ForwardCache &cc = cache ? *cache : local;
  cc.c_emb = c_emb;

  if (params.use_history) {
    cc.h_emb = gather_rows(params.embeddings, inst.history);
    cc.hist = attn_forward(cc.h_emb, c_emb, params.w_q, params.w_k, params.w_v,
                           params.attn);
    axpy(z, 1.0, cc.hist.out);
  }
  if (params.use_candidates) {
    // Set-wise block: candidates attend over the candidate set itself.
    AttnConfig cand_cfg;
    cand_cfg.variant = AttnVariant::kSoftmax;
    cand_cfg.scale = params.attn.scale;
    cand_cfg.keep_cache = true;
    cc.cand = attn_forward(c_emb, c_emb, params.w_q2, params.w_k2, params.w_v2,
                           cand_cfg);
    axpy(z, 1.0, cc.cand.out);
  }
  cc.z = z;

  std::vector<double> scores(inst.candidates.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < z.cols; ++k) acc += z(i, k) * params.head(k, 0);
    scores[i] = acc;
  }
  return scores;
}

ModelGrads zero_grads(const SolarParams &params) {
  ModelGrads g;
  g.embeddings = Matrix(params.embeddings.rows, params.embeddings.cols);
  const std::size_t d = params.dim();
  g.w_q = Matrix(d, d);
  g.w_k = Matrix(d, d);
  g.w_v = Matrix(d, d);
  g.w_q2 = Matrix(d, d);
  g.w_k2 = Matrix(d, d);
  g.w_v2 = Matrix(d, d);
  g.head = Matrix(d, 1);
  return g;
}

void backward_scores(const SolarParams &params, const RankingInstance &inst,
                     const ForwardCache &cache, const std::vector<double> &d_scores,
                     ModelGrads &grads) {
  const std::size_t m = inst.candidates.size(), d = params.dim();
  if (d_scores.size() != m)
    throw std::invalid_argument("backward_scores: gradient size mismatch");

  // scores = z head
  Matrix dz(m, d);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      dz(i, k) = d_scores[i] * params.head(k, 0);
      grads.head(k, 0) += cache.z(i, k) * d_scores[i];
    }

  Matrix dc = dz;  // residual path

  if (params.use_candidates) {
    const AttnGrads g = attn_backward_standard(cache.cand, dz);
    axpy(dc, 1.0, g.h);  // candidate block keys/values come from C as well
    axpy(dc, 1.0, g.c);
    axpy(grads.w_q2, 1.0, g.w_q);
    axpy(grads.w_k2, 1.0, g.w_k);
    axpy(grads.w_v2, 1.0, g.w_v);
  }
  if (params.use_history) {
    const AttnGrads g = params.attn.variant == AttnVariant::kSvd
                            ? pipeline_backward(cache.hist, dz)
                            : attn_backward_standard(cache.hist, dz);
    axpy(dc, 1.0, g.c);
    axpy(grads.w_q, 1.0, g.w_q);
    axpy(grads.w_k, 1.0, g.w_k);
    axpy(grads.w_v, 1.0, g.w_v);
    for (std::size_t t = 0; t < inst.history.size(); ++t)
      for (std::size_t k = 0; k < d; ++k)
        grads.embeddings(inst.history[t], k) += g.h(t, k);
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < d; ++k)
      grads.embeddings(inst.candidates[i], k) += dc(i, k);
}

LossValue listwise_loss(const std::vector<double> &scores,
                        const std::vector<std::size_t> &positives) {
  if (positives.empty())
    throw std::invalid_argument("listwise_loss: empty positive set");
  const std::size_t m = scores.size();
  const double k = static_cast<double>(positives.size());

  double max_s = scores[0];
  for (double s : scores) max_s = std::max(max_s, s);
  double z = 0.0;
  std::vector<double> pi(m);
  for (std::size_t j = 0; j < m; ++j) {
    pi[j] = std::exp(scores[j] - max_s);
    z += pi[j];
  }
  for (double &p : pi) p /= z;

  LossValue out;
  out.loss = std::log(z) + max_s;
  for (std::size_t i : positives) {
    if (i >= m) throw std::out_of_range("listwise_loss: positive index out of range");
    out.loss -= scores[i] / k;
  }
  out.grad = pi;
  for (std::size_t i : positives) out.grad[i] -= 1.0 / k;
  return out;
}

LossValue pointwise_bce_loss(const std::vector<double> &scores,
                             const std::vector<int> &labels) {
  const std::size_t m = scores.size();
  LossValue out;
  out.grad.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = scores[i];
    const double y = labels[i] ? 1.0 : 0.0;
    // log(1 + exp(-|s|)) + max(s, 0) - y*s, numerically stable
    out.loss += std::log1p(std::exp(-std::fabs(s))) + std::max(s, 0.0) - y * s;
    const double p = 1.0 / (1.0 + std::exp(-s));
    out.grad[i] = (p - y) / static_cast<double>(m);
  }
  out.loss /= static_cast<double>(m);
  return out;
}

LossValue pairwise_bce_loss(const std::vector<double> &scores,
                            const std::vector<int> &labels) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw std::invalid_argument("pairwise_bce_loss: need both classes");

  LossValue out;
  out.grad.assign(scores.size(), 0.0);
  const double w = 1.0 / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
  for (std::size_t i : pos) {
    for (std::size_t j : neg) {
      const double delta = scores[i] - scores[j];
      out.loss += w * (std::log1p(std::exp(-std::fabs(delta))) + std::max(-delta, 0.0));
      const double p = 1.0 / (1.0 + std::exp(-delta));
      out.grad[i] += w * (p - 1.0);
      out.grad[j] -= w * (p - 1.0);
    }
  }
  return out;
}

LossKind loss_kind_from_string(const std::string &name) {
  if (name == "listwise") return LossKind::kListwise;
  if (name == "pointwise-bce") return LossKind::kPointwiseBce;
  if (name == "pairwise-bce") return LossKind::kPairwiseBce;
  throw std::invalid_argument("unknown loss: " + name);
}

namespace {

std::vector<std::size_t> positive_indices(const RankingInstance &inst) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < inst.labels.size(); ++i)
    if (inst.labels[i]) pos.push_back(i);
  return pos;
}

// Returns false when the instance cannot be scored under this loss.
bool instance_loss(LossKind kind, const RankingInstance &inst,
                   const std::vector<double> &scores, LossValue &out) {
  const std::vector<std::size_t> pos = positive_indices(inst);
  switch (kind) {
    case LossKind::kListwise:
      if (pos.empty()) return false;
      out = listwise_loss(scores, pos);
      return true;
    case LossKind::kPointwiseBce:
      out = pointwise_bce_loss(scores, inst.labels);
      return true;
    case LossKind::kPairwiseBce:
      if (pos.empty() || pos.size() == inst.labels.size()) return false;
      out = pairwise_bce_loss(scores, inst.labels);
      return true;
  }
  return false;
}

struct Momentum {
  ModelGrads v;
  explicit Momentum(const SolarParams &p) : v(zero_grads(p)) {}
};

void sgd_step(SolarParams &p, const ModelGrads &g, Momentum &mom, double lr,
              double mu, bool freeze_embeddings) {
  auto upd = [&](Matrix &param, Matrix &vel, const Matrix &grad) {
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      vel.data[i] = mu * vel.data[i] - lr * grad.data[i];
      param.data[i] += vel.data[i];
    }
  };
  if (!freeze_embeddings) upd(p.embeddings, mom.v.embeddings, g.embeddings);
  upd(p.w_q, mom.v.w_q, g.w_q);
  upd(p.w_k, mom.v.w_k, g.w_k);
  upd(p.w_v, mom.v.w_v, g.w_v);
  upd(p.w_q2, mom.v.w_q2, g.w_q2);
  upd(p.w_k2, mom.v.w_k2, g.w_k2);
  upd(p.w_v2, mom.v.w_v2, g.w_v2);
  upd(p.head, mom.v.head, g.head);
}

}  // namespace

EpochMetrics evaluate(const SolarParams &params,
                      const std::vector<RankingInstance> &data, LossKind loss_kind) {
  EpochMetrics m;
  std::size_t counted = 0;
  std::map<std::uint64_t, std::pair<double, std::size_t>> per_user;
  for (const auto &inst : data) {
    const std::vector<double> scores = forward_scores(params, inst);
    LossValue lv;
    if (instance_loss(loss_kind, inst, scores, lv)) {
      m.loss += lv.loss;
      ++counted;
    }
    const double a = auc(scores, inst.labels);
    m.auc += a;
    m.risk += bipartite_risk(scores, inst.labels);
    auto &acc = per_user[inst.user_id];
    acc.first += a;
    acc.second += 1;
  }
  const double n = static_cast<double>(data.size());
  if (counted) m.loss /= static_cast<double>(counted);
  m.auc /= n;
  m.risk /= n;
  for (const auto &[user, acc] : per_user)
    m.uauc += acc.first / static_cast<double>(acc.second);
  m.uauc /= static_cast<double>(per_user.size());
  return m;
}

TrainResult train(const SolarParams &params, const std::vector<RankingInstance> &data,
                  const TrainConfig &cfg) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.lr < 0.0) throw std::invalid_argument("train: negative lr");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size == 0");
  for (const auto &inst : data) {
    for (std::size_t id : inst.history)
      if (id >= params.embeddings.rows)
        throw std::out_of_range("train: history id out of vocab");
    for (std::size_t id : inst.candidates)
      if (id >= params.embeddings.rows)
        throw std::out_of_range("train: candidate id out of vocab");
  }

  TrainResult result;
  result.params = params;
  Momentum mom(params);
  Rng shuffle_rng(derive_seed(cfg.seed, 0x501a));

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  SolarParams last_good = result.params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Seeded Fisher-Yates shuffle.
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    std::size_t counted = 0;
    bool bad = false;
    for (std::size_t start = 0; start < order.size() && !bad;
         start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, order.size());
      ModelGrads grads = zero_grads(result.params);
      std::size_t in_batch = 0;
      for (std::size_t pos = start; pos < stop; ++pos) {
        const RankingInstance &inst = data[order[pos]];
        ForwardCache cache;
        LossValue lv;
        try {
          // Ids were validated up front; exceptions here mean the numerics
          // blew up (non-finite parameters reaching the factorization).
          const std::vector<double> scores =
              forward_scores(result.params, inst, &cache);
          if (!instance_loss(cfg.loss, inst, scores, lv)) {
            ++result.skipped_instances;
            continue;
          }
        } catch (const std::invalid_argument &) {
          bad = true;
          break;
        }
        if (!std::isfinite(lv.loss)) {
          bad = true;
          break;
        }
        backward_scores(result.params, inst, cache, lv.grad, grads);
        epoch_loss += lv.loss;
        ++counted;
        ++in_batch;
      }
      if (bad || in_batch == 0) continue;
      const double inv = 1.0 / static_cast<double>(in_batch);
      for (Matrix *g : {&grads.embeddings, &grads.w_q, &grads.w_k, &grads.w_v,
                        &grads.w_q2, &grads.w_k2, &grads.w_v2, &grads.head})
        for (double &v : g->data) v *= inv;
      sgd_step(result.params, grads, mom, cfg.lr, cfg.momentum,
               cfg.freeze_embeddings);
    }

    if (bad || !is_finite(result.params.embeddings) || !is_finite(result.params.head)) {
      result.params = last_good;
      result.diverged = true;
      break;
    }
    last_good = result.params;

    EpochMetrics em = evaluate(result.params, data, cfg.loss);
    em.epoch = epoch;
    if (counted) em.loss = epoch_loss / static_cast<double>(counted);
    result.history.push_back(em);
  }
  return result;
}

double mean_pairwise_cosine(const Matrix &rows) {
  const std::size_t m = rows.rows, d = rows.cols;
  if (m < 2) return 0.0;
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += rows(i, k) * rows(i, k);
    norms[i] = std::sqrt(acc);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double dot_ij = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot_ij += rows(i, k) * rows(j, k);
      const double denom = norms[i] * norms[j];
      total += denom > 0.0 ? dot_ij / denom : 0.0;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace solar

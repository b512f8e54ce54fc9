#include "solar/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace solar {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Matrix random_consistent_preferences(std::size_t k, Rng &rng) {
  std::vector<double> latent(k);
  for (double &g : latent) g = rng.gaussian();
  Matrix p(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (i != j) p(i, j) = sigmoid(latent[i] - latent[j]);
  return p;
}

VerificationReport bayes_limit_check(const Matrix &p, double lr, int steps,
                                     double tolerance) {
  const std::size_t k = p.rows;
  if (p.cols != k) throw std::invalid_argument("bayes_limit_check: p not square");
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      if (p(i, j) <= 0.0 || p(i, j) >= 1.0)
        throw std::invalid_argument("bayes_limit_check: p_ij must lie in (0,1)");
      if (std::fabs(p(i, j) + p(j, i) - 1.0) > 1e-12)
        throw std::invalid_argument("bayes_limit_check: p_ji != 1 - p_ij");
    }

  std::vector<double> f(k, 0.0), grad(k);
  for (int step = 0; step < steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        grad[i] += sigmoid(f[i] - f[j]) - p(i, j);
      }
    for (std::size_t i = 0; i < k; ++i) f[i] -= lr * grad[i];
  }

  double resid = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (i != j) resid = std::max(resid, std::fabs(sigmoid(f[i] - f[j]) - p(i, j)));

  VerificationReport rep;
  rep.check = "bayes_limit";
  rep.measured = resid;
  rep.expected = 0.0;
  rep.tolerance = tolerance;
  rep.pass = resid <= tolerance;
  return rep;
}

bool has_contextual_flip(const TwoContextSpec &spec) {
  for (std::size_t a = 0; a < spec.first.items.size(); ++a) {
    for (std::size_t b = 0; b < spec.first.items.size(); ++b) {
      if (a == b) continue;
      const std::size_t ia = spec.first.items[a], ib = spec.first.items[b];
      // locate the same pair in the second context
      const auto &c2 = spec.second.items;
      const auto pa = std::find(c2.begin(), c2.end(), ia);
      const auto pb = std::find(c2.begin(), c2.end(), ib);
      if (pa == c2.end() || pb == c2.end()) continue;
      const double d1 = spec.first.eta[a] - spec.first.eta[b];
      const double d2 = spec.second.eta[pa - c2.begin()] - spec.second.eta[pb - c2.begin()];
      if (d1 > 0.0 && d2 < 0.0) return true;
    }
  }
  return false;
}

namespace {

std::vector<int> threshold_labels(const std::vector<double> &eta) {
  std::vector<int> labels(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) labels[i] = eta[i] >= 0.5 ? 1 : 0;
  return labels;
}

double context_risk(const ContextSpec &ctx, const std::vector<double> &item_scores) {
  std::vector<double> s(ctx.items.size());
  for (std::size_t i = 0; i < ctx.items.size(); ++i) s[i] = item_scores[ctx.items[i]];
  const std::vector<int> labels = threshold_labels(ctx.eta);
  std::size_t pos = 0, neg = 0, bad = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    ++pos;
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (!labels[j] && s[j] >= s[i]) ++bad;
  }
  neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return 0.0;
  return static_cast<double>(bad) / static_cast<double>(pos * neg);
}

double pair_weight(const ContextSpec &ctx) {
  const std::vector<int> labels = threshold_labels(ctx.eta);
  std::size_t pos = 0;
  for (int l : labels) pos += l;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return 0.0;
  return 1.0 / static_cast<double>(pos * neg);
}

}  // namespace

IrreducibleRiskResult irreducible_risk_check(const TwoContextSpec &spec) {
  IrreducibleRiskResult out;
  const bool flip = has_contextual_flip(spec);

  // Best context-independent scorer by exhaustive enumeration of total
  // orderings of the item universe (feasible for <= 8 items).
  if (spec.n_items > 8)
    throw std::invalid_argument("irreducible_risk_check: enumeration capped at 8 items");
  std::vector<std::size_t> perm(spec.n_items);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 2.0;
  do {
    std::vector<double> scores(spec.n_items);
    for (std::size_t r = 0; r < perm.size(); ++r)
      scores[perm[r]] = static_cast<double>(perm.size() - r);
    const double risk = spec.first.prob * context_risk(spec.first, scores) +
                        spec.second.prob * context_risk(spec.second, scores);
    best = std::min(best, risk);
  } while (std::next_permutation(perm.begin(), perm.end()));

  const double floor = flip ? std::min(spec.first.prob, spec.second.prob) *
                                  std::min(pair_weight(spec.first), pair_weight(spec.second))
                            : 0.0;

  VerificationReport point;
  point.check = flip ? "irreducible_risk/pointwise_floor" : "irreducible_risk/no_flip_floor";
  point.measured = best;
  point.expected = floor;
  point.tolerance = 1e-12;
  point.pass = flip ? (best > 0.0 && best >= floor - 1e-12) : (best <= 1e-12);
  out.reports.push_back(point);
  out.vacuous = !flip;

  // The set-wise oracle scores with eta itself, per context.
  double oracle_risk = 0.0;
  for (const ContextSpec *ctx : {&spec.first, &spec.second}) {
    std::vector<double> s(spec.n_items, 0.0);
    for (std::size_t i = 0; i < ctx->items.size(); ++i) s[ctx->items[i]] = ctx->eta[i];
    oracle_risk += ctx->prob * context_risk(*ctx, s);
  }
  VerificationReport oracle;
  oracle.check = "irreducible_risk/setwise_oracle";
  oracle.measured = oracle_risk;
  oracle.expected = 0.0;
  oracle.tolerance = 1e-12;
  oracle.pass = oracle_risk <= 1e-12;
  out.reports.push_back(oracle);
  return out;
}

std::vector<VerificationReport> lipschitz_check(std::size_t samples,
                                                std::uint64_t seed) {
  Rng rng(seed);
  const double sqrt2 = std::sqrt(2.0);
  double max_norm = 0.0;
  for (std::size_t it = 0; it < samples; ++it) {
    const std::size_t m = 2 + rng.below(63);           // [2, 64]
    const std::size_t k = 1 + rng.below(m - 1);        // [1, m-1]
    const double spread = std::pow(10.0, -1.0 + 2.5 * rng.uniform());
    std::vector<double> s(m);
    for (double &x : s) x = spread * rng.gaussian();
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const std::vector<std::size_t> pos(idx.begin(), idx.begin() + k);
    const LossValue lv = listwise_loss(s, pos);
    double norm2 = 0.0;
    for (double g : lv.grad) norm2 += g * g;
    max_norm = std::max(max_norm, std::sqrt(norm2));
  }

  std::vector<VerificationReport> reports;
  VerificationReport bound;
  bound.check = "lipschitz/max_grad_norm";
  bound.measured = max_norm;
  bound.expected = sqrt2;
  bound.tolerance = 1e-9;
  bound.pass = max_norm <= sqrt2 + 1e-9;
  reports.push_back(bound);

  // Supremum approach: one positive at -50 against a negative at +50 pushes
  // the gradient to (-1, +1).
  const LossValue lv = listwise_loss({-50.0, 50.0}, {0});
  const double norm = std::sqrt(lv.grad[0] * lv.grad[0] + lv.grad[1] * lv.grad[1]);
  VerificationReport sup;
  sup.check = "lipschitz/supremum_case";
  sup.measured = norm;
  sup.expected = sqrt2;
  sup.tolerance = 0.01 * sqrt2;
  sup.pass = norm >= 0.99 * sqrt2 && norm <= sqrt2 + 1e-9;
  reports.push_back(sup);
  return reports;
}

std::vector<VerificationReport> rademacher_mismatch(const TheoryConfig &cfg) {
  const std::size_t m = cfg.m, n = cfg.requests, dim = std::max(cfg.dim, m + 1);
  const double w_bound = cfg.head_bound, b_bound = cfg.feature_bound;
  if (cfg.rho < 0.0 || cfg.rho > 1.0)
    throw std::invalid_argument("rademacher_mismatch: rho outside [0,1]");
  Rng rng(cfg.seed);

  // Per-request orthonormal frame (c_u, d_u1..d_um); features
  // z_ui = B (sqrt(rho) c_u + sqrt(1-rho) d_ui) give exact pairwise inner
  // product rho B^2 within a request and norm exactly B.
  const double a = b_bound * std::sqrt(cfg.rho);
  const double b = b_bound * std::sqrt(1.0 - cfg.rho);
  std::vector<Matrix> frames;  // (m+1) x dim each, rows orthonormal
  frames.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    Matrix f = rng.gaussian_matrix(m + 1, dim);
    for (std::size_t r = 0; r < f.rows; ++r) {
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < r; ++p) {
          double proj = 0.0;
          for (std::size_t k = 0; k < dim; ++k) proj += f(r, k) * f(p, k);
          for (std::size_t k = 0; k < dim; ++k) f(r, k) -= proj * f(p, k);
        }
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < dim; ++k) norm += f(r, k) * f(r, k);
      norm = std::sqrt(norm);
      for (std::size_t k = 0; k < dim; ++k) f(r, k) /= norm;
    }
    frames.push_back(std::move(f));
  }

  // Request sums Z_u = sum_i z_ui = m a c_u + b sum_i d_ui.
  std::vector<std::vector<double>> request_sums(n, std::vector<double>(dim, 0.0));
  for (std::size_t u = 0; u < n; ++u) {
    const Matrix &f = frames[u];
    for (std::size_t k = 0; k < dim; ++k) {
      double acc = static_cast<double>(m) * a * f(0, k);
      for (std::size_t i = 0; i < m; ++i) acc += b * f(1 + i, k);
      request_sums[u][k] = acc;
    }
  }

  const double denom = static_cast<double>(m) * static_cast<double>(n);
  double iid_acc = 0.0, dep_acc = 0.0;
  std::vector<double> v(dim);
  for (std::size_t s = 0; s < cfg.mc_samples; ++s) {
    // One sign per item.
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      const Matrix &f = frames[u];
      double c_coef = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double sign = rng.next_u64() & 1 ? 1.0 : -1.0;
        c_coef += sign * a;
        for (std::size_t k = 0; k < dim; ++k) v[k] += sign * b * f(1 + i, k);
      }
      for (std::size_t k = 0; k < dim; ++k) v[k] += c_coef * f(0, k);
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    iid_acc += std::sqrt(norm2);

    // One sign per request.
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      const double sign = rng.next_u64() & 1 ? 1.0 : -1.0;
      for (std::size_t k = 0; k < dim; ++k) v[k] += sign * request_sums[u][k];
    }
    norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    dep_acc += std::sqrt(norm2);
  }
  const double iid_est = w_bound * iid_acc / (denom * static_cast<double>(cfg.mc_samples));
  const double dep_est = w_bound * dep_acc / (denom * static_cast<double>(cfg.mc_samples));

  const double factor = std::sqrt(1.0 + (static_cast<double>(m) - 1.0) * cfg.rho);
  const double iid_bound = w_bound * b_bound / std::sqrt(denom);
  const double dep_bound = iid_bound * factor;

  std::vector<VerificationReport> reports;
  VerificationReport ratio;
  ratio.check = "rademacher/ratio_m" + std::to_string(m) + "_rho" + std::to_string(cfg.rho);
  ratio.measured = dep_est / iid_est;
  ratio.expected = factor;
  ratio.tolerance = 0.10 * factor;
  ratio.pass = std::fabs(ratio.measured - factor) <= ratio.tolerance;
  reports.push_back(ratio);

  VerificationReport iid_rep;
  iid_rep.check = "rademacher/iid_below_bound_m" + std::to_string(m);
  iid_rep.measured = iid_est;
  iid_rep.expected = iid_bound;
  iid_rep.tolerance = 0.0;
  iid_rep.pass = iid_est <= iid_bound;
  reports.push_back(iid_rep);

  VerificationReport dep_rep;
  dep_rep.check = "rademacher/dep_below_bound_m" + std::to_string(m);
  dep_rep.measured = dep_est;
  dep_rep.expected = dep_bound;
  dep_rep.tolerance = 0.0;
  dep_rep.pass = dep_est <= dep_bound;
  reports.push_back(dep_rep);
  return reports;
}

double representation_correlation(const SolarParams &params,
                                  const std::vector<RankingInstance> &data) {
  double acc = 0.0;
  for (const auto &inst : data) {
    ForwardCache cache;
    forward_scores(params, inst, &cache);
    acc += mean_pairwise_cosine(cache.z);
  }
  return acc / static_cast<double>(data.size());
}

std::vector<VerificationReport> correlation_check(
    const SolarParams &point_params, const SolarParams &set_params,
    const std::vector<RankingInstance> &data, double min_gap) {
  const double rho_point = representation_correlation(point_params, data);
  const double rho_set = representation_correlation(set_params, data);

  std::vector<VerificationReport> reports;
  VerificationReport rp;
  rp.check = "correlation/rho_point";
  rp.measured = rho_point;
  rp.expected = rho_point;
  rp.tolerance = 0.0;
  rp.pass = true;
  reports.push_back(rp);

  VerificationReport rs;
  rs.check = "correlation/rho_set";
  rs.measured = rho_set;
  rs.expected = rho_set;
  rs.tolerance = 0.0;
  rs.pass = true;
  reports.push_back(rs);

  VerificationReport order;
  order.check = "correlation/set_below_point";
  order.measured = rho_point - rho_set;
  order.expected = min_gap;
  order.tolerance = 0.0;
  order.pass = rho_set < rho_point && (rho_point - rho_set) >= min_gap;
  reports.push_back(order);
  return reports;
}

}  // namespace solar

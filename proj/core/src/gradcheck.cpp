#include "solar/gradcheck.hpp"

#include <cmath>

#include "solar/attention.hpp"
#include "solar/decomp.hpp"
#include "solar/rng.hpp"

namespace solar {

double central_diff_entry(const std::function<double(const Matrix &)> &loss,
                          Matrix x, std::size_t i, std::size_t j) {
  const double h = 1e-6 * (1.0 + std::fabs(x(i, j)));
  const double saved = x(i, j);
  x(i, j) = saved + h;
  const double up = loss(x);
  x(i, j) = saved - h;
  const double down = loss(x);
  return (up - down) / (2.0 * h);
}

Matrix central_diff_matrix(const std::function<double(const Matrix &)> &loss,
                           const Matrix &x) {
  Matrix g(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j)
      g(i, j) = central_diff_entry(loss, x, i, j);
  return g;
}

double rel_err(const Matrix &a, const Matrix &b, double floor) {
  return frobenius_norm(sub(a, b)) / std::max(frobenius_norm(b), floor);
}

Matrix make_low_rank(std::size_t rows, std::size_t cols,
                     const std::vector<double> &sigma, Rng &rng) {
  const std::size_t r = sigma.size();
  const Matrix left = qr_thin(rng.gaussian_matrix(rows, r)).q;
  const Matrix right = qr_thin(rng.gaussian_matrix(cols, r)).q;
  Matrix mid(r, r);
  for (std::size_t i = 0; i < r; ++i) mid(i, i) = sigma[i];
  return matmul(left, matmul(mid, transpose(right)));
}

std::vector<GradSuiteRow> gradient_suite(const GradSuiteConfig &cfg) {
  std::vector<GradSuiteRow> rows;
  Rng rng(cfg.seed);

  for (int inst = 0; inst < cfg.instances; ++inst) {
    // Retained spectrum with gap ratios >= 1.3; complement exactly zero so
    // the sketch reproduces the factors the backward differentiates.
    std::vector<double> sigma(cfg.rank);
    double s = 1.0 + rng.uniform();
    for (std::size_t i = 0; i < cfg.rank; ++i) {
      sigma[i] = s;
      s /= 1.3 + rng.uniform();
    }
    const Matrix h = make_low_rank(cfg.n_hist, cfg.dim, sigma, rng);
    const Matrix c = rng.gaussian_matrix(cfg.n_cand, cfg.dim);
    const Matrix w_q = rng.gaussian_matrix(cfg.dim, cfg.dim);
    const Matrix w_k = rng.gaussian_matrix(cfg.dim, cfg.dim);
    const Matrix w_v = rng.gaussian_matrix(cfg.dim, cfg.dim);
    const Matrix g_out = rng.gaussian_matrix(cfg.n_cand, cfg.dim);

    AttnConfig acfg;
    acfg.variant = AttnVariant::kSvd;
    acfg.rank = cfg.rank;
    acfg.n_iter = 2;
    acfg.apply_softmax = (inst % 2) == 0;
    acfg.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(inst));

    const AttnOutput fwd = attn_svd(h, c, w_q, w_k, w_v, acfg);

    AttnGrads grads;
    Matrix g_p = pipeline_upstream_gp(fwd, g_out, grads);
    SvdFactors f = recover_left_vectors(h, fwd.cache.factors);
    SvdGrads g = chain_to_factors(g_p, f, cfg.clamp_eps);
    if (cfg.inject_f_sign_bug) g.f.f = scale(g.f.f, -1.0);
    grads.clamped_pairs = g.f.clamped_pairs;
    grads.h = svd_backward_truncated(f, g);

    const auto loss_with = [&](const Matrix &hm, const Matrix &cm,
                               const Matrix &qm, const Matrix &km,
                               const Matrix &vm) {
      return dot(attn_svd(hm, cm, qm, km, vm, acfg).out, g_out);
    };

    const auto check_block = [&](const std::string &name, const Matrix &analytic,
                                 const Matrix &numeric) {
      GradSuiteRow row;
      row.instance = inst;
      row.block = name;
      row.clamped_pairs = grads.clamped_pairs;
      row.max_rel_err = rel_err(analytic, numeric);
      row.pass = row.max_rel_err <= cfg.tolerance;
      rows.push_back(row);
    };

    Matrix fd_h = central_diff_matrix(
        [&](const Matrix &x) { return loss_with(x, c, w_q, w_k, w_v); }, h);
    // The factorization gradient lives in the retained subspace; compare the
    // numeric gradient there.
    fd_h = matmul(f.u, matmul(matmul(transpose(f.u), matmul(fd_h, f.v)),
                              transpose(f.v)));
    check_block("H", grads.h, fd_h);

    check_block("C",
                grads.c,
                central_diff_matrix(
                    [&](const Matrix &x) { return loss_with(h, x, w_q, w_k, w_v); }, c));
    check_block("W_Q",
                grads.w_q,
                central_diff_matrix(
                    [&](const Matrix &x) { return loss_with(h, c, x, w_k, w_v); }, w_q));
    check_block("W_K",
                grads.w_k,
                central_diff_matrix(
                    [&](const Matrix &x) { return loss_with(h, c, w_q, x, w_v); }, w_k));
    check_block("W_V",
                grads.w_v,
                central_diff_matrix(
                    [&](const Matrix &x) { return loss_with(h, c, w_q, w_k, x); }, w_v));
  }
  return rows;
}

}  // namespace solar

#include <doctest.h>

#include "oracles.hpp"
#include "solar/gradcheck.hpp"
#include "solar/metrics.hpp"
#include "solar/solar_model.hpp"
#include "solar/theory.hpp"

using namespace solar;

TEST_SUITE_BEGIN("solar");

namespace {

AttnConfig svd_cfg(std::size_t rank, std::uint64_t seed) {
  AttnConfig cfg;
  cfg.variant = AttnVariant::kSvd;
  cfg.rank = rank;
  cfg.n_iter = 3;
  cfg.seed = seed;
  return cfg;
}

RankingInstance small_instance(const ItemCatalog &cat, std::uint64_t seed,
                               std::size_t n_hist = 5, std::size_t m = 4) {
  FlipSpec flip;
  flip.force_mixed = true;
  Rng rng(seed);
  return gen_instance(cat, n_hist, m, flip, rng);
}

}  // namespace

TEST_CASE("metrics") {
  SUBCASE("separated and reversed rankings") {
    CHECK(bipartite_risk({3.0, 2.0, 1.0}, {1, 1, 0}) == 0.0);
    CHECK(bipartite_risk({1.0, 2.0, 3.0}, {1, 1, 0}) == 1.0);
    CHECK(auc({3.0, 2.0, 1.0}, {1, 1, 0}) == 1.0);
    CHECK(auc({1.0, 2.0, 3.0}, {1, 1, 0}) == 0.0);
  }
  SUBCASE("empty classes") {
    CHECK(bipartite_risk({1.0, 2.0}, {1, 1}) == 0.0);
    CHECK(auc({1.0, 2.0}, {0, 0}) == 0.5);
  }
  SUBCASE("ties split AUC but count as risk errors") {
    CHECK(auc({1.0, 1.0}, {1, 0}) == 0.5);
    CHECK(bipartite_risk({1.0, 1.0}, {1, 0}) == 1.0);
  }
  SUBCASE("random instances match the brute-force oracles") {
    Rng rng(5);
    for (int it = 0; it < 50; ++it) {
      const std::size_t m = 8;
      std::vector<double> scores(m);
      std::vector<int> labels(m);
      for (auto &s : scores) s = rng.below(5) * 0.5;  // force ties
      bool any = false;
      for (auto &l : labels) {
        l = rng.uniform() < 0.4 ? 1 : 0;
        any |= l == 1;
      }
      if (!any) labels[0] = 1;
      CHECK(auc(scores, labels) ==
            doctest::Approx(oracle::auc_brute(scores, labels)).epsilon(1e-12));
      CHECK(bipartite_risk(scores, labels) ==
            doctest::Approx(oracle::risk_brute(scores, labels)).epsilon(1e-12));
    }
  }
}

TEST_CASE("listwise loss") {
  SUBCASE("symmetric two-item case") {
    const LossValue lv = listwise_loss({0.0, 0.0}, {0});
    CHECK(lv.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(lv.grad[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(lv.grad[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("dominant positive drives the loss to zero") {
    const LossValue lv = listwise_loss({60.0, 0.0, -3.0}, {0});
    CHECK(lv.loss <= 1e-12);
  }
  SUBCASE("random draws match the scalar oracle and the norm bound") {
    Rng rng(9);
    for (int it = 0; it < 200; ++it) {
      std::vector<double> s(6);
      for (auto &x : s) x = 4.0 * rng.gaussian();
      const std::vector<std::size_t> pos{1 + rng.below(2), 4};
      if (pos[0] == pos[1]) continue;
      const LossValue lv = listwise_loss(s, pos);
      double ref_loss;
      std::vector<double> ref_grad;
      oracle::listwise_ref(s, pos, &ref_loss, &ref_grad);
      CHECK(lv.loss == doctest::Approx(ref_loss).epsilon(1e-12));
      double norm = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(lv.grad[j] == doctest::Approx(ref_grad[j]).epsilon(1e-10));
        norm += lv.grad[j] * lv.grad[j];
      }
      CHECK(std::sqrt(norm) <= std::sqrt(2.0) + 1e-12);
    }
  }
  SUBCASE("shift invariance") {
    Rng rng(11);
    std::vector<double> s(5), shifted(5);
    for (std::size_t i = 0; i < 5; ++i) {
      s[i] = rng.gaussian();
      shifted[i] = s[i] + 37.5;
    }
    const LossValue a = listwise_loss(s, {2});
    const LossValue b = listwise_loss(shifted, {2});
    CHECK(std::fabs(a.loss - b.loss) <= 1e-10);
  }
  SUBCASE("empty positive set is rejected") {
    CHECK_THROWS_AS(listwise_loss({1.0, 2.0}, {}), std::invalid_argument);
  }
}

TEST_CASE("point-wise configuration ignores co-candidates") {
  const ItemCatalog cat = gen_catalog(30, 8, 4, 3);
  SolarParams params = init_params(30, 8, svd_cfg(2, 5), 7, false, false);
  params.embeddings = cat.embeddings;

  RankingInstance inst = small_instance(cat, 13);
  const std::vector<double> base = forward_scores(params, inst);

  RankingInstance swapped = inst;
  std::swap(swapped.candidates[1], swapped.candidates[2]);
  const std::vector<double> after = forward_scores(params, swapped);
  CHECK(after[0] == doctest::Approx(base[0]).epsilon(1e-12));
  CHECK(after[3] == doctest::Approx(base[3]).epsilon(1e-12));

  RankingInstance replaced = inst;
  replaced.candidates[1] = (inst.candidates[1] + 7) % 30;
  CHECK(forward_scores(params, replaced)[0] ==
        doctest::Approx(base[0]).epsilon(1e-12));
}

TEST_CASE("candidate-set block makes scores context dependent") {
  const ItemCatalog cat = gen_catalog(30, 8, 4, 3);
  SolarParams params = init_params(30, 8, svd_cfg(2, 5), 7, false, true);

  RankingInstance inst = small_instance(cat, 17);
  const std::vector<double> base = forward_scores(params, inst);

  RankingInstance replaced = inst;
  replaced.candidates[1] = (inst.candidates[1] + 11) % 30;
  const std::vector<double> after = forward_scores(params, replaced);
  CHECK(std::fabs(after[0] - base[0]) > 1e-8);
}

TEST_CASE("zero head zeroes the scores") {
  const ItemCatalog cat = gen_catalog(30, 8, 4, 3);
  SolarParams params = init_params(30, 8, svd_cfg(2, 5), 7);
  params.head = Matrix(8, 1);
  const RankingInstance inst = small_instance(cat, 19);
  for (double s : forward_scores(params, inst)) CHECK(s == 0.0);
}

TEST_CASE("full-model finite differences") {
  // Embeddings feed four paths (history, query, candidate block, residual);
  // all other parameter blocks are plain. The history path crosses the
  // truncated factorization, whose gradient intentionally omits the
  // complement component; adding bias_term's correction on that path makes
  // the numeric and analytic embedding gradients agree. With rank = d the
  // complement is empty and no correction exists at all.
  const std::size_t vocab = 20;
  auto run_check = [&](std::size_t d, std::size_t rank, std::size_t true_rank,
                       bool correct_bias) {
    const ItemCatalog cat = gen_catalog(vocab, d, true_rank, 3);
    SolarParams params = init_params(vocab, d, svd_cfg(rank, 5), 7);
    params.embeddings = cat.embeddings;
    RankingInstance inst = small_instance(cat, 23, rank == d ? d + 2 : 5, 4);

    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < inst.labels.size(); ++i)
      if (inst.labels[i]) pos.push_back(i);
    REQUIRE(!pos.empty());

    ForwardCache cache;
    const std::vector<double> scores = forward_scores(params, inst, &cache);
    const LossValue lv = listwise_loss(scores, pos);
    ModelGrads grads = zero_grads(params);
    backward_scores(params, inst, cache, lv.grad, grads);

    if (correct_bias) {
      // Reconstruct the history block's upstream and add the dropped
      // complement component of the factorization gradient.
      Matrix dz(inst.candidates.size(), d);
      for (std::size_t i = 0; i < dz.rows; ++i)
        for (std::size_t k = 0; k < d; ++k)
          dz(i, k) = lv.grad[i] * params.head(k, 0);
      AttnGrads partial;
      const Matrix g_p = pipeline_upstream_gp(cache.hist, dz, partial);
      const SvdFactors f = recover_left_vectors(cache.h_emb, cache.hist.cache.factors);
      const SvdGrads g = chain_to_factors(g_p, f);
      const BiasTerm bias = bias_term(f, g);
      for (std::size_t t = 0; t < inst.history.size(); ++t)
        for (std::size_t k = 0; k < d; ++k)
          grads.embeddings(inst.history[t], k) += bias.e(t, k);
    }

    const auto loss_of = [&](const SolarParams &p) {
      return listwise_loss(forward_scores(p, inst), pos).loss;
    };

    SolarParams probe = params;
    const Matrix fd_emb = central_diff_matrix(
        [&](const Matrix &x) {
          probe.embeddings = x;
          return loss_of(probe);
        },
        params.embeddings);
    probe = params;
    CHECK(rel_err(grads.embeddings, fd_emb) <= 1e-3);

    const Matrix fd_head = central_diff_matrix(
        [&](const Matrix &x) {
          probe.head = x;
          return loss_of(probe);
        },
        params.head);
    probe = params;
    CHECK(rel_err(grads.head, fd_head) <= 1e-3);

    const Matrix fd_wk = central_diff_matrix(
        [&](const Matrix &x) {
          probe.w_k = x;
          return loss_of(probe);
        },
        params.w_k);
    probe = params;
    CHECK(rel_err(grads.w_k, fd_wk) <= 1e-3);

    const Matrix fd_wq2 = central_diff_matrix(
        [&](const Matrix &x) {
          probe.w_q2 = x;
          return loss_of(probe);
        },
        params.w_q2);
    CHECK(rel_err(grads.w_q2, fd_wq2) <= 1e-3);
  };

  SUBCASE("rank-2 factorization with the bias-corrected history path") {
    run_check(8, 2, 2, true);
  }
  SUBCASE("full-rank factorization needs no correction") {
    run_check(8, 8, 8, false);
  }
}

TEST_CASE("training") {
  const ItemCatalog cat = gen_catalog(40, 8, 3, 51);
  FlipSpec flip;
  flip.force_mixed = true;
  const auto data = gen_dataset(cat, 30, 6, 4, flip, 53);
  const SolarParams params = init_params(40, 8, svd_cfg(2, 5), 57);

  SUBCASE("zero learning rate leaves parameters unchanged") {
    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.epochs = 3;
    const TrainResult res = train(params, data, cfg);
    CHECK(res.params.embeddings.data == params.embeddings.data);
    CHECK(res.params.w_q.data == params.w_q.data);
    CHECK(res.params.head.data == params.head.data);
  }

  SUBCASE("a single memorizable instance trains monotonically") {
    const std::vector<RankingInstance> one(1, data[0]);
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.momentum = 0.0;
    cfg.epochs = 50;
    cfg.batch_size = 1;
    const TrainResult res = train(params, one, cfg);
    REQUIRE(res.history.size() == 50);
    for (std::size_t e = 1; e < res.history.size(); ++e)
      CHECK(res.history[e].loss <= res.history[e - 1].loss + 1e-12);
  }

  SUBCASE("same seed reproduces identical metrics") {
    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.epochs = 3;
    const TrainResult a = train(params, data, cfg);
    const TrainResult b = train(params, data, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
      CHECK(a.history[e].loss == b.history[e].loss);
      CHECK(a.history[e].auc == b.history[e].auc);
    }
    CHECK(a.params.embeddings.data == b.params.embeddings.data);
  }

  SUBCASE("divergence restores the last finite parameters") {
    TrainConfig cfg;
    cfg.lr = 1e9;
    cfg.epochs = 5;
    const TrainResult res = train(params, data, cfg);
    CHECK(res.diverged);
    CHECK(is_finite(res.params.embeddings));
  }
}

TEST_SUITE_END();

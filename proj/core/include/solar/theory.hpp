#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "solar/datagen.hpp"
#include "solar/matrix.hpp"
#include "solar/rng.hpp"
#include "solar/solar_model.hpp"

namespace solar {

struct VerificationReport {
  std::string check;
  double measured = 0.0;
  double expected = 0.0;  // target value or bound, depending on the check
  double tolerance = 0.0;
  bool pass = false;
};

// The confidence level delta and the independent-unit count T of the
// generalization bounds only annotate reports; no estimator consumes them
// (the checks target the complexity terms, not the confidence terms).
struct TheoryConfig {
  double head_bound = 1.0;    // W: ||w|| <= W for the linear class
  double feature_bound = 1.0; // B: ||z|| <= B
  std::size_t m = 10;         // candidate set size
  std::size_t requests = 2000;  // N
  double rho = 0.0;           // target within-request correlation
  std::size_t mc_samples = 4000;
  std::size_t dim = 64;       // feature dimension for the sign experiments
  std::uint64_t seed = 1;
};

// Draws a preference matrix realizable by score differences: p_ij =
// sigmoid(g_i - g_j) for latent g, so p_ji = 1 - p_ij holds exactly.
Matrix random_consistent_preferences(std::size_t k, Rng &rng);

// Minimizes the population pairwise BCE over point-wise scores by gradient
// descent and reports max_ij |sigmoid(f_i - f_j) - p_ij|. At the optimum the
// score differences are the preference log-odds.
VerificationReport bayes_limit_check(const Matrix &p, double lr, int steps,
                                     double tolerance = 1e-2);

// A pair of candidate sets over a small item universe with per-context
// ground-truth relevance; labels for the noiseless check are eta thresholded
// at 1/2.
struct ContextSpec {
  std::vector<std::size_t> items;
  std::vector<double> eta;
  double prob = 0.5;
};

struct TwoContextSpec {
  std::size_t n_items = 0;
  ContextSpec first, second;
};

bool has_contextual_flip(const TwoContextSpec &spec);

struct IrreducibleRiskResult {
  std::vector<VerificationReport> reports;
  bool vacuous = false;  // spec without a flip: the check is skipped
};

// Enumerates every total ordering of the item universe to find the best
// context-independent scorer, then compares against the analytic floor and
// the set-wise oracle that scores with eta directly.
IrreducibleRiskResult irreducible_risk_check(const TwoContextSpec &spec);

// Samples listwise-loss gradients over random (scores, positives) draws and
// checks the l2 norm never exceeds sqrt(2); also drives the constructed
// near-supremum case.
std::vector<VerificationReport> lipschitz_check(std::size_t samples,
                                                std::uint64_t seed);

// Monte Carlo Rademacher complexity of the bounded linear class under
// i.i.d. signs per item vs one sign per request, on features built with
// exact within-request correlation rho. Reports the dep/iid ratio against
// sqrt(1 + (m-1) rho) and both estimates against their closed-form bounds.
std::vector<VerificationReport> rademacher_mismatch(const TheoryConfig &cfg);

// Mean within-request pairwise cosine of the cached representations of a
// trained model over a dataset.
double representation_correlation(const SolarParams &params,
                                  const std::vector<RankingInstance> &data);

// Compares representation correlation of a trained point-wise model against
// a trained set-wise model on a shared-component dataset.
std::vector<VerificationReport> correlation_check(
    const SolarParams &point_params, const SolarParams &set_params,
    const std::vector<RankingInstance> &data, double min_gap = 0.0);

}  // namespace solar

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "solar/matrix.hpp"
#include "solar/svd_backward.hpp"

namespace solar {

// Central finite differences of a scalar function of one matrix entry,
// step h = 1e-6 (1 + |x|).
double central_diff_entry(const std::function<double(const Matrix &)> &loss,
                          Matrix x, std::size_t i, std::size_t j);

Matrix central_diff_matrix(const std::function<double(const Matrix &)> &loss,
                           const Matrix &x);

// ||a - b||_F / max(||b||_F, floor).
double rel_err(const Matrix &a, const Matrix &b, double floor = 1e-12);

struct GradSuiteConfig {
  int instances = 30;
  std::uint64_t seed = 7;
  std::size_t n_hist = 6;
  std::size_t n_cand = 2;
  std::size_t dim = 4;
  std::size_t rank = 2;
  double tolerance = 1e-4;
  double clamp_eps = kDefaultClampEps;
  // Test fixture: negates F before the backward so a corrupted build is
  // observable through the suite (it must fail).
  bool inject_f_sign_bug = false;
};

struct GradSuiteRow {
  int instance = 0;
  std::string block;
  double max_rel_err = 0.0;
  int clamped_pairs = 0;
  bool pass = false;
};

// Exactly rank-r history matrices with retained-spectrum gap ratios >= 1.3,
// random candidates/weights, random linear functional as the loss. Each
// parameter block of pipeline_backward is compared against central finite
// differences through the full forward; the H block is compared within
// span(U) span(V)^T, which is where the truncated factorization defines its
// gradient (the dropped complement component is bias_term's subject).
std::vector<GradSuiteRow> gradient_suite(const GradSuiteConfig &cfg);

// Builds an exactly rank-r matrix with prescribed singular values.
Matrix make_low_rank(std::size_t rows, std::size_t cols,
                     const std::vector<double> &sigma, Rng &rng);

}  // namespace solar

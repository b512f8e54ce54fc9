#pragma once

#include <vector>

namespace solar {

// Fraction of positive-negative pairs ordered wrongly, ties counted as errors
// (s_j >= s_i). Returns 0 when either class is empty.
double bipartite_risk(const std::vector<double> &scores,
                      const std::vector<int> &labels);

// Pairwise AUC with the standard 0.5 tie convention, computed from rank
// statistics. Returns 0.5 when either class is empty. Note the tie handling
// intentionally differs from bipartite_risk, which charges ties as errors.
double auc(const std::vector<double> &scores, const std::vector<int> &labels);

}  // namespace solar

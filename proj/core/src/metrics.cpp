#include "solar/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace solar {

double bipartite_risk(const std::vector<double> &scores,
                      const std::vector<int> &labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("bipartite_risk: size mismatch");
  std::size_t pos = 0, neg = 0, bad = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    ++pos;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j]) continue;
      if (scores[j] >= scores[i]) ++bad;
    }
  }
  neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return 0.0;
  return static_cast<double>(bad) / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auc(const std::vector<double> &scores, const std::vector<int> &labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int l : labels) pos += l ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return 0.5;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups, then the Mann-Whitney statistic.
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k]) rank_sum += rank[k];
  const double u = rank_sum - 0.5 * static_cast<double>(pos) * (static_cast<double>(pos) + 1.0);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace solar
